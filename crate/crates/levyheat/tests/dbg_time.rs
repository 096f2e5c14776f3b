use std::time::Instant;
use levyheat::density::{DensityEvaluator, DensityTable};
use levyheat::model::LevyModel;
use std::sync::Arc;

#[test]
fn table_timing_final() {
    for (name, model, t) in [
        ("cauchy t=4", LevyModel::isotropic_stable(1, 1.0), 4.0),
        ("tempered t=4", LevyModel::tempered(1, 1.0, 1.0), 4.0),
        ("tempered t=0.25", LevyModel::tempered(1, 1.0, 1.0), 0.25),
        ("truncated t=1", LevyModel::tempered(1, 0.8, f64::INFINITY), 1.0),
    ] {
        let ev = DensityEvaluator::new(Arc::new(model)).unwrap();
        let start = Instant::now();
        match DensityTable::build(&ev, 0.00125, t, 1e-6, 1e9) {
            Ok(_) => eprintln!("{name}: table build {:.2}s", start.elapsed().as_secs_f64()),
            Err(e) => eprintln!("{name}: ERR after {:.2}s: {}", start.elapsed().as_secs_f64(),
                format!("{e}").chars().take(110).collect::<String>()),
        }
    }
}
