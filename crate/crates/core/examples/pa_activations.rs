//! Amplitude transfer curves of the amplifier models used as activations.

use num_complex::Complex64;
use wpnn::activation::ActivationModel;

fn main() {
    let models = [
        ("rapp p=1", ActivationModel::Rapp { a_sat: 1.0, p: 1.0 }),
        ("rapp p=2", ActivationModel::RAPP_DEFAULT),
        ("rapp p=10", ActivationModel::Rapp { a_sat: 1.0, p: 10.0 }),
        ("saleh", ActivationModel::SALEH_DEFAULT),
        ("clip 0.8", ActivationModel::EnvelopeClip { ceiling: 0.8 }),
    ];
    print!("{:>5}", "|x|");
    for (name, _) in &models {
        print!(" {name:>10}");
    }
    println!("  saleh phase");
    for i in 0..=12 {
        let r = i as f64 * 0.25;
        print!("{r:>5.2}");
        for (_, m) in &models {
            print!(" {:>10.4}", m.apply_scalar(Complex64::new(r, 0.0)).norm());
        }
        println!("  {:>8.4}", ActivationModel::SALEH_DEFAULT.apply_scalar(Complex64::new(r, 0.0)).arg());
    }
}
