use std::io::{BufRead, BufReader, Read, Write};

use ratio_cpd::ScoreSeries;

use crate::output::{CliResult, Failure};

pub const HEADER: &str = "t,D";

/// Shortest round-trip decimals, so a reread file is bit-identical.
pub fn write_scores(scores: &ScoreSeries, w: &mut dyn Write) -> std::io::Result<()> {
    writeln!(w, "{HEADER}")?;
    for &(t, d) in &scores.entries {
        writeln!(w, "{t},{d:?}")?;
    }
    Ok(())
}

pub fn read_scores<R: Read>(reader: R, name: &str) -> CliResult<ScoreSeries> {
    let bad = |line: usize, msg: &str| Failure::data(format!("{name}:{line}: {msg}"));
    let mut entries = Vec::new();
    for (i, line) in BufReader::new(reader).lines().enumerate() {
        let line = line.map_err(|e| bad(i + 1, &e.to_string()))?;
        let line = line.trim();
        if line.is_empty() || (i == 0 && line == HEADER) {
            continue;
        }
        let (t, d) = line
            .split_once(',')
            .ok_or_else(|| bad(i + 1, "expected two columns 't,D'"))?;
        let t: usize = t.trim().parse().map_err(|_| bad(i + 1, "timestamp is not an index"))?;
        let d: f64 = d.trim().parse().map_err(|_| bad(i + 1, "score is not a number"))?;
        entries.push((t, d));
    }
    if entries.is_empty() {
        return Err(Failure::data(format!("{name}: no scores")));
    }
    ScoreSeries::from_entries(entries).map_err(|e| Failure::data(format!("{name}: {e}")))
}
