//! The scripted expert across the full evaluation sweep. It reads ground
//! truth, so it should succeed everywhere; anything else is a world bug.

use std::time::Instant;

use lpaf::evalkit::{sweep_controller, SweepSpec};
use lpaf::worldgen::ExpertController;

fn main() -> lpaf::Result<()> {
    let spec = SweepSpec::default();
    let t = Instant::now();
    let r = sweep_controller(&ExpertController, "expert", 0, &spec)?;
    for v in &r.views {
        println!(
            "{:>6}°  {:>2}/{}  mean steps {:.1}",
            v.theta_deg, v.successes, v.episodes, v.mean_steps
        );
    }
    println!(
        "mean success {:.1}% in {:.1?}",
        100.0 * r.mean_success(None)?,
        t.elapsed()
    );
    Ok(())
}
