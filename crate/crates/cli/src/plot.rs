//! gnuplot scripts for the CSV files written by each subcommand.

use std::fmt::Write;

fn header(title: &str, xlabel: &str, ylabel: &str) -> String {
    format!(
        "# gnuplot script\nset datafile separator ','\nset key outside right\nset title '{title}'\nset xlabel '{xlabel}'\nset ylabel '{ylabel}'\nset arrow from 0, graph 0 to 0, graph 1 nohead dt 2\n"
    )
}

/// One line per file, all with columns `x,y`.
pub fn curves(title: &str, ylabel: &str, files: &[(String, String)]) -> String {
    let mut s = header(title, "x", ylabel);
    let parts: Vec<String> = files
        .iter()
        .map(|(f, label)| format!("'{f}' using 1:2 skip 1 with lines title '{label}'"))
        .collect();
    let _ = writeln!(s, "plot {}", parts.join(", \\\n     "));
    s
}

/// Trajectories `z_i(t)` over `[t_from, t_to]` in the `(z, t)` plane and the
/// cars at the final time in the `(z, rho)` plane.
pub fn trajectory(title: &str, files: &[String], t_from: f64, t_to: f64) -> String {
    let mut s =
        String::from("# gnuplot script\nset datafile separator ','\nset multiplot layout 2,1\n");
    let _ = writeln!(
        s,
        "set title '{title}: z_i(t)'\nset xlabel 'z'\nset ylabel 't'"
    );
    let parts: Vec<String> = files
        .iter()
        .map(|f| format!("'{f}' using ($1 >= {t_from} ? $3 : 1/0):1 skip 1 with dots notitle"))
        .collect();
    let _ = writeln!(s, "plot {}", parts.join(", \\\n     "));
    let _ = writeln!(
        s,
        "set title '{title}: cars at t = {t_to}'\nset ylabel 'rho'"
    );
    let parts: Vec<String> = files
        .iter()
        .map(|f| {
            format!("'{f}' using (abs($1 - {t_to}) < 1e-9 ? $3 : 1/0):4 skip 1 with points pt 7 ps 0.5 title '{f}'")
        })
        .collect();
    let _ = writeln!(s, "plot {}", parts.join(", \\\n     "));
    s.push_str("unset multiplot\n");
    s
}

/// `f-`, `f+` from `flux.csv` with the level `fbar` and the two states marked.
pub fn flux(title: &str, fbar: f64, rho_minus: f64, rho_plus: f64) -> String {
    let mut s =
        String::from("# gnuplot script\nset datafile separator ','\nset key outside right\n");
    let _ = writeln!(
        s,
        "set title '{title}'\nset xlabel 'rho'\nset ylabel 'f'\nset xrange [0:1]"
    );
    let _ = writeln!(
        s,
        "set arrow from {rho_minus}, graph 0 to {rho_minus}, graph 1 nohead dt 2 lc 'blue'"
    );
    let _ = writeln!(
        s,
        "set arrow from {rho_plus}, graph 0 to {rho_plus}, graph 1 nohead dt 2 lc 'red'"
    );
    let _ = writeln!(
        s,
        "plot 'flux.csv' using 1:2 skip 1 with lines lc 'blue' title 'f-', \\\n     'flux.csv' using 1:3 skip 1 with lines lc 'red' title 'f+', \\\n     {fbar} with lines dt 3 lc 'black' title 'fbar'"
    );
    s
}

/// Density of the last state in a `t,x,rho` file.
pub fn pde(title: &str, file: &str, t: f64) -> String {
    let mut s = header(title, "x", "rho");
    let _ = writeln!(
        s,
        "plot '{file}' using (abs($1 - {t}) < 1e-12 ? $2 : 1/0):3 skip 1 with lines title 't = {t}'"
    );
    s
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn curves_lists_every_file() {
        let s = curves(
            "W",
            "Q",
            &[("a.csv".into(), "a".into()), ("b.csv".into(), "b".into())],
        );
        assert!(s.contains("'a.csv'") && s.contains("'b.csv'"));
        assert!(s.contains("separator ','"));
    }
}
