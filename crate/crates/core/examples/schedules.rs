//! Donor ramp and residual weight over denoising progress, as a table.

use blendr::schedule::{beta_schedule, tei_weights, TeiSchedule};

fn main() -> blendr::Result<()> {
    let tei = TeiSchedule::default();
    println!("t_progress  gamma   anchor  donor   beta(beta0=6)");
    for i in 0..=20 {
        let t = i as f64 / 20.0;
        let gamma = tei.gamma(t)?;
        let w = tei_weights(gamma, 3)?;
        println!(
            "{t:>10.2}  {gamma:.4}  {:.4}  {:.4}  {:.4}",
            w.as_slice()[0],
            w.as_slice()[1],
            beta_schedule(6.0, t)?
        );
    }
    Ok(())
}
