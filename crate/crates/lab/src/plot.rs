use crate::config::ExperimentKind;

/// Gnuplot script for the tables of `kind`, run from the run directory.
pub fn script(kind: ExperimentKind) -> String {
    let body = match kind {
        ExperimentKind::RdfPoint | ExperimentKind::RdfCurve => {
            "set output 'rdf.png'\n\
             set xlabel 'distortion'\n\
             set ylabel 'rate (bits/symbol)'\n\
             plot 'points.csv' using 4:3 with linespoints title 'R(D)'\n\
             set output 'convergence.png'\n\
             set logscale y\n\
             set xlabel 'iteration'\n\
             set ylabel 'gap (bits)'\n\
             plot 'convergence.csv' using 2:($3 > 0 ? $3 : 1/0) with lines title 'gap'\n"
        }
        ExperimentKind::NtsRun => {
            "set output 'kl.png'\n\
             set xlabel 'generation'\n\
             set ylabel 'median KL(Q*||Q_n)'\n\
             plot 'aggregate.csv' using 1:2 with lines title 'KL', \
             '' using 1:3 with lines title 'rate'\n"
        }
        ExperimentKind::RedundancySweep => {
            "set output 'redundancy.png'\n\
             set logscale x 2\n\
             set xlabel 'L'\n\
             set ylabel 'median rate gap (bits/symbol)'\n\
             plot 'redundancy.csv' using 1:2:($3 / 2) with yerrorlines title 'gap'\n"
        }
        ExperimentKind::ExploreCompare => {
            "set output 'explore.png'\n\
             set style data histogram\n\
             set style fill solid 0.5\n\
             set ylabel 'final KL(Q*||Q_n)'\n\
             plot 'explore.csv' using 4:xtic(1) title 'final KL'\n"
        }
    };
    format!("set datafile separator ','\nset key autotitle columnhead\nset terminal pngcairo size 800,600\n{body}")
}
