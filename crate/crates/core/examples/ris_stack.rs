//! Reconfigurable surfaces: the weight realised by a two-layer stacked
//! metasurface, and the gain of phase optimization on a single surface.

use wpnn::linalg::spectral_norm;
use wpnn::phylayers::{optimize_ris_phases, ris_channel, RisLayer, RisSimStack};
use wpnn::rng::{complex_gaussian_matrix, gaussian_matrix, stream};

fn main() -> wpnn::Result<()> {
    let mut rng = stream(11, "ris-example");
    let layers = vec![
        RisLayer::passive(gaussian_matrix(&mut rng, 16, 1, 3.0), complex_gaussian_matrix(&mut rng, 16, 16, 1.0 / 16.0))?,
        RisLayer::passive(gaussian_matrix(&mut rng, 16, 1, 3.0), complex_gaussian_matrix(&mut rng, 4, 16, 1.0 / 16.0))?,
    ];
    let stack = RisSimStack::passive(Some(complex_gaussian_matrix(&mut rng, 16, 4, 0.25)), layers, None)?;
    let w = stack.effective_weight()?;
    println!("stacked surface realises a {:?} weight, spectral norm {:.3}", w.shape(), spectral_norm(&w));

    let (rx, tx) = (8, 2);
    for n in [16, 64] {
        let g = vec![complex_gaussian_matrix(&mut rng, n, tx, 1.0)];
        let r = vec![complex_gaussian_matrix(&mut rng, rx, n, 1.0)];
        let before = ris_channel(&r[0], &vec![0.0; n], &g[0], None)?.norm_sq();
        let theta = optimize_ris_phases(&r, &g, None, 8)?;
        let after = ris_channel(&r[0], &theta, &g[0], None)?.norm_sq();
        println!("N={n:>3}: channel energy {before:.1} with zero phases, {after:.1} optimized");
    }
    Ok(())
}
