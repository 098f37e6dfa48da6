use std::collections::BTreeMap;
use std::fmt::Write as _;

use proxqn::harness::RaceEntry;

/// A gnuplot script with one log-scale panel per problem, objective error against seconds.
pub fn script(entries: &[RaceEntry]) -> String {
    let mut by_problem: BTreeMap<&str, Vec<&RaceEntry>> = BTreeMap::new();
    for e in entries.iter().filter(|e| e.outcome.is_ok()) {
        by_problem.entry(e.problem.as_str()).or_default().push(e);
    }
    let mut s = String::new();
    s.push_str("set terminal pngcairo size 900,600\n");
    s.push_str("set datafile separator ','\n");
    s.push_str("set logscale y\n");
    s.push_str("set xlabel 'seconds'\n");
    s.push_str("set ylabel 'F(x) - F*'\n");
    s.push_str("set key outside right\n");
    for (problem, runs) in by_problem {
        writeln!(s, "\nset title '{problem}'").unwrap();
        writeln!(s, "set output '{}.png'", problem.replace('\'', "_")).unwrap();
        let curves: Vec<String> = runs
            .iter()
            .map(|e| format!("'{}' using 4:($2 > 0 ? $2 : NaN) with lines title '{}'", e.trace_file_name(), e.solver))
            .collect();
        writeln!(s, "plot {}", curves.join(", \\\n     ")).unwrap();
    }
    s
}
