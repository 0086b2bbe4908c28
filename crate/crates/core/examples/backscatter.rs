//! Passive tags as one multiply-accumulate: reflection coefficients steer
//! the received gain, and projection keeps every tag passive.

use num_complex::Complex64;
use wpnn::diffcore::CTensor;
use wpnn::phylayers::BackscatterField;
use wpnn::rng::{complex_gaussian_matrix, stream};

fn main() -> wpnn::Result<()> {
    let mut rng = stream(2, "backscatter-example");
    let m = 8;
    let h_tx = complex_gaussian_matrix(&mut rng, m, 1, 1.0);
    let h_rx = complex_gaussian_matrix(&mut rng, m, 1, 1.0);
    let direct = Complex64::new(0.1, 0.0);

    let random = BackscatterField::new(complex_gaussian_matrix(&mut rng, m, 1, 0.25), h_tx.clone(), h_rx.clone(), direct)?;
    println!("random reflections: |gain| = {:.3}", random.effective_gain().norm());

    // co-phase every tag with the direct path at full reflection
    let aligned = CTensor::from_fn(m, 1, |k, _| Complex64::from_polar(1.0, direct.arg() - (h_tx.get(k, 0) * h_rx.get(k, 0)).arg()));
    let best = BackscatterField::new(aligned, h_tx.clone(), h_rx.clone(), direct)?;
    println!("co-phased tags:     |gain| = {:.3}", best.effective_gain().norm());

    let mut hot = BackscatterField::new(CTensor::from_fn(m, 1, |_, _| Complex64::new(2.0, 1.0)), h_tx, h_rx, direct)?;
    println!("|Γ| = 2.24 feasible? {}", hot.is_feasible(1e-12));
    hot.project_constraints();
    println!("after projection feasible? {}, |Γ_0| = {:.3}", hot.is_feasible(1e-12), hot.gamma.get(0, 0).norm());
    Ok(())
}
