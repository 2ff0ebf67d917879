//! Confirms the hand-written backward passes against central finite
//! differences at full observation width, for both estimators.

use std::time::Instant;

use set_estimation::cli::model_gradient_errors;

fn main() -> set_estimation::Result<()> {
    let start = Instant::now();
    let (set_err, mlp_err) = model_gradient_errors(0)?;
    println!("transformer max relative error {set_err:.3e}");
    println!("baseline    max relative error {mlp_err:.3e}");
    println!("checked in {:.1}s", start.elapsed().as_secs_f64());
    assert!(set_err < 1e-4 && mlp_err < 1e-4);
    println!("both models pass the 1e-4 bar");
    Ok(())
}
