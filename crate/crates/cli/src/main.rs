fn main() {
    std::process::exit(tsdyn_cli::main_with_args(std::env::args_os()));
}
