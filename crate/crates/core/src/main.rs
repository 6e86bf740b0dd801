use clap::Parser;

fn main() -> std::process::ExitCode {
    qtrust::cli::main_with(qtrust::cli::Cli::parse())
}
