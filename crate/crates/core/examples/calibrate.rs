//! Prints the calibration table for `harness::CALIBRATED`.

use campanato_core::harness::Harness;

fn main() {
    let h = Harness::default_for(2);
    let start = std::time::Instant::now();
    for rep in h.calibration_suite().expect("calibration suite") {
        println!("    (\"{}\", \"{}\", {:.6}),", rep.id, rep.problem, rep.max_ratio);
    }
    eprintln!("{:?}", start.elapsed());
}
