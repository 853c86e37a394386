fn main() {
    std::process::exit(dra_sim::main_with_args(std::env::args_os()));
}
