use clap::Parser;

fn main() {
    let cli = qsmt::Cli::parse();
    let mut stdout = std::io::stdout();
    let code = qsmt::run(cli, &mut stdout);
    std::process::exit(code);
}
