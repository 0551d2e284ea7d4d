fn main() {
    std::process::exit(retarget_ik::cli::main_with_args(std::env::args_os()));
}
