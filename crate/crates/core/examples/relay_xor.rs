//! Two amplify-and-forward relays learn XOR when their power amplifiers
//! saturate, and cannot when the amplifiers are linear.

use wpnn::activation::ActivationModel;
use wpnn::training::{evaluate, train_ist_spsa, train_pat, xor_relay_model, ChannelResample, PatConfig, Samples, SpsaConfig};

fn main() -> wpnn::Result<()> {
    let xor = Samples::xor();
    let cfg = PatConfig { epochs: 2000, batch_size: 4, lr: 0.05, channel_resample: ChannelResample::Fixed, noise_during_training: false, ..PatConfig::default() };

    for (label, act) in [("rapp", ActivationModel::RAPP_DEFAULT), ("linear", ActivationModel::Linear)] {
        let mut model = xor_relay_model(act, 1);
        let hist = train_pat(&mut model, &xor, None, &cfg)?;
        let acc = evaluate(&model, &xor, 4, None)?.accuracy;
        println!("PAT  {label:>6}: {}/4 correct, final loss {:.4}", (acc * 4.0).round(), hist.step_losses.last().unwrap());
    }

    // the same network trained only through loss measurements
    let mut model = xor_relay_model(ActivationModel::RAPP_DEFAULT, 1);
    let spsa = SpsaConfig { iterations: 20_000, a: 0.5, c: 0.05, ..SpsaConfig::default() };
    let trace = train_ist_spsa(&mut model, &spsa, &mut |m| Ok(evaluate(m, &xor, 4, None)?.loss))?;
    let acc = evaluate(&model, &xor, 4, None)?.accuracy;
    println!("SPSA   rapp: {}/4 correct after {} loss measurements", (acc * 4.0).round(), trace.evaluations);
    Ok(())
}
