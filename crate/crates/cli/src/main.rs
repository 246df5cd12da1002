use std::io;

fn main() {
    let code = ftl_lab::run(std::env::args_os(), &mut io::stdout(), &mut io::stderr());
    std::process::exit(code);
}
