//! Finite-difference check of every differentiable operation of the tape.

use wpnn::diffcore::gradcheck::run_suite;

fn main() -> wpnn::Result<()> {
    let t = std::time::Instant::now();
    let report = run_suite(100, 0)?;
    for op in &report.ops {
        println!("{:<18} {:>4} instances  max rel err {:.2e}", op.name, op.instances, op.max_rel_err);
    }
    println!("worst {:.2e} over {} operations in {:.1}s", report.max_rel_err(), report.ops.len(), t.elapsed().as_secs_f64());
    Ok(())
}
