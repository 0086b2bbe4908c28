//! Train, save, reload: a checkpoint restores every trainable tensor and
//! records a hash of the configuration it came from.

use wpnn::activation::ActivationModel;
use wpnn::training::{config_hash, evaluate, load_checkpoint, save_checkpoint, train_pat, xor_relay_model, ChannelResample, Checkpoint, PatConfig, Samples};

fn main() -> wpnn::Result<()> {
    let xor = Samples::xor();
    let cfg = PatConfig { epochs: 2000, batch_size: 4, lr: 0.05, channel_resample: ChannelResample::Fixed, noise_during_training: false, ..PatConfig::default() };
    let mut model = xor_relay_model(ActivationModel::RAPP_DEFAULT, 1);
    train_pat(&mut model, &xor, None, &cfg)?;

    let path = std::env::temp_dir().join("wpnn-xor.ckpt.json");
    save_checkpoint(&path, &Checkpoint::of_model(&model, &config_hash("xor, 2000 epochs")))?;
    let ckpt = load_checkpoint(&path)?;
    println!("saved {} tensors to {}", ckpt.tensors.len(), path.display());

    let mut fresh = xor_relay_model(ActivationModel::RAPP_DEFAULT, 99);
    println!("fresh model: {}/4", evaluate(&fresh, &xor, 4, None)?.accuracy * 4.0);
    ckpt.apply_to(&mut fresh)?;
    let (a, b) = (evaluate(&model, &xor, 4, None)?, evaluate(&fresh, &xor, 4, None)?);
    println!("restored:    {}/4, loss {:.6} (trained {:.6})", b.accuracy * 4.0, b.loss, a.loss);
    Ok(())
}
