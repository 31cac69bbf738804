//! The residual set operations on hand-made vectors.

use blendr::rso::{clamp_norm, combine, intersection, orthogonalize_against_guidance, union};
use blendr::vecspace::Residual;

fn r(v: &[f64]) -> Residual {
    Residual::new(v.to_vec()).unwrap()
}

fn main() -> blendr::Result<()> {
    let guidance = r(&[1.0, 0.0, 0.0]);
    let residuals = [r(&[0.5, 2.0, 0.0]), r(&[0.2, 1.0, 1.0]), r(&[0.0, 4.0, -0.5])];

    let u = union(&residuals, 1e-8)?;
    let i = intersection(&residuals)?;
    println!("union        {:?}", u.as_slice());
    println!("intersection {:?}", i.as_slice());

    let combined = combine(Some(&u), Some(&i), 3.0, 1.0)?;
    let orth = orthogonalize_against_guidance(&combined, &guidance)?;
    let clamped = clamp_norm(&orth, &guidance, 1.0)?;
    println!("combined     {:?}", combined.as_slice());
    println!("orthogonal   {:?}", orth.as_slice());
    println!("clamped      {:?}", clamped.as_slice());
    Ok(())
}
