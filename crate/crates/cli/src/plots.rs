//! gnuplot scripts for the CSV artifacts of a run. Scripts reference the
//! CSVs by relative path, so run them from inside the output directory:
//! `cd out && gnuplot density.gp`.

use std::fs;
use std::path::{Path, PathBuf};

use anyhow::{bail, Context, Result};

/// Files a script can be generated for, and what kind of plot each gets.
const KNOWN: [(&str, PlotKind); 6] = [
    ("density.csv", PlotKind::Overlay),
    ("density_unperturbed.csv", PlotKind::Overlay),
    ("sandwich.csv", PlotKind::Envelope),
    ("compare_curves.csv", PlotKind::BeforeAfter),
    ("convolve.csv", PlotKind::Convolution),
    ("constants.csv", PlotKind::Constants),
];

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
enum PlotKind {
    Overlay,
    Envelope,
    BeforeAfter,
    Convolution,
    Constants,
}

const PREAMBLE: &str = "set datafile separator ','\nset key autotitle columnhead\nset key top right\nset grid\n";

fn script(csv: &str, kind: PlotKind) -> String {
    let stem = csv.trim_end_matches(".csv");
    let body = match kind {
        PlotKind::Overlay => format!(
            "set logscale xy\nset xlabel 'x'\nset ylabel 'density'\nset title '{stem}'\n\
             plot '{csv}' using 1:2 with points pt 7 ps 0.4 title 'mc_kde', \\\n     \
             '{csv}' using 1:($2-2*$3):($2+2*$3) with yerrorbars lc rgb 'gray' notitle, \\\n     \
             '{csv}' using 1:4 with lines lw 2 title 'semi_analytic'\n"
        ),
        PlotKind::Envelope => format!(
            "set logscale xy\nset xlabel 'x'\nset ylabel 'density'\nset title 'two-sided tail estimate'\n\
             plot '{csv}' using 1:3:4 with filledcurves lc rgb '#ccddff' title 'envelope', \\\n     \
             '{csv}' using 1:3 with lines dt 2 title 'lower', \\\n     \
             '{csv}' using 1:4 with lines dt 2 title 'upper', \\\n     \
             '{csv}' using 1:2 with lines lw 2 title 'density'\n"
        ),
        PlotKind::BeforeAfter => format!(
            "set logscale xy\nset xlabel 'x'\nset ylabel 'density'\nset title 'before and after jumps'\n\
             plot '{csv}' using 1:2 with lines lw 2 title 'unperturbed', \\\n     \
             '{csv}' using 1:4 with lines lw 2 title 'perturbed'\n"
        ),
        PlotKind::Convolution => format!(
            "set logscale y\nset xlabel 'u'\nset ylabel 'density'\nset y2label 'abs_err'\nset y2tics\n\
             set title 'n-fold convolution'\n\
             plot '{csv}' using 1:2 with lines lw 2 title 'analytic', \\\n     \
             '{csv}' using 1:3 with points pt 6 ps 0.3 title 'oracle', \\\n     \
             '{csv}' using 1:4 axes x1y2 with lines title 'abs_err'\n"
        ),
        PlotKind::Constants => format!(
            "set xlabel 'row'\nset ylabel 'exponent'\nset title 'tail exponent'\n\
             plot '{csv}' using 0:4 with linespoints title columnhead(4)\n"
        ),
    };
    format!("{PREAMBLE}set terminal pngcairo size 900,650\nset output '{stem}.png'\n{body}")
}

/// Writes one `.gp` script per recognised CSV in `dir` and returns their
/// paths. Fails, listing the expected names, when none is present.
pub fn emit_plots(dir: &Path) -> Result<Vec<PathBuf>> {
    if !dir.is_dir() {
        bail!("artifact directory {} does not exist", dir.display());
    }
    let mut written = Vec::new();
    for (csv, kind) in KNOWN {
        if dir.join(csv).is_file() {
            let path = dir.join(csv.replace(".csv", ".gp"));
            fs::write(&path, script(csv, kind)).with_context(|| format!("cannot write {}", path.display()))?;
            written.push(path);
        }
    }
    if written.is_empty() {
        let expected: Vec<&str> = KNOWN.iter().map(|(f, _)| *f).collect();
        bail!(
            "no plottable artifacts in {}; expected at least one of: {}",
            dir.display(),
            expected.join(", ")
        );
    }
    Ok(written)
}
