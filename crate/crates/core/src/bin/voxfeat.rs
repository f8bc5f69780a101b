fn main() {
    std::process::exit(voxfeat::cli::main_with_args(std::env::args_os()));
}
