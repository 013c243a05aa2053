//! The simulated bench: ring masks on an 8-bit modulator, three-step
//! interferometric retrieval on the camera, spot-size optimization on the
//! retrieved fields, and the Exp-S vs Num-S linearity check.

use qme::bench::BenchConfig;
use qme::operators::assemble_io;
use qme::pipelines::{bench_experiment, DEFAULT_TAU};

pub fn run_example() -> qme::Result<()> {
    // a half-size bench keeps this quick; the reference core is ~6 px
    let exp = bench_experiment(BenchConfig::pixel_units(512, 64), 11, 6.0, 0.5)?;
    println!(
        "reference chirp {:.4} rad/px², R_B = {:.2} px, w_B = {:.2} px",
        exp.bench.reference_chirp, exp.r_b, exp.w_b
    );

    let roi = exp.roi(exp.r_b)?;
    let measured = assemble_io(&exp.measured.basis, &roi)?;
    let truth = assemble_io(&exp.measured.truth, &roi)?;
    let dev = (&measured.entries - &truth.entries).iter().map(|v| v.norm()).fold(0.0, f64::max) / truth.max_abs();
    println!("IO from retrieved vs true fields: max deviation {:.3}%", 100.0 * dev);

    for r in [3.0, 4.0, 6.0, 10.0, 20.0] {
        let run = exp.spot(r, DEFAULT_TAU)?;
        let rep = &run.report;
        println!(
            "R = {r:4.1} px: K = {}, w/w_B = {:.3}, Strehl = {:.2}%, Exp-S vs Num-S {:.3}%",
            rep.retained,
            rep.w.unwrap_or(f64::NAN) / exp.w_b,
            100.0 * rep.strehl,
            100.0 * exp.linearity(&rep.coefficients)?
        );
    }
    Ok(())
}

fn main() {
    if let Err(e) = run_example() {
        eprintln!("{e}");
        std::process::exit(1);
    }
}
