//! The small modelling layer on top of the conic solver.
//!
//! Maximizes `t` with `t <= ln(x)` (exponential cone), `||(x, y)|| <= 2` and
//! `y >= 1`, in both solver modes.

use hybrid_ris_uav::conic::{Affine, Program, SolveSettings, SolverMode};

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let mut prog = Program::new();
    let t = prog.var("t")?;
    let x = prog.var("x")?;
    let y = prog.var("y")?;
    prog.exp_log(t.into(), x.into())?;
    prog.soc(vec![x.into(), y.into()], Affine::constant(2.0))?;
    prog.le(1.0, y)?;
    prog.maximize(t)?;

    for mode in [SolverMode::ExpCone, SolverMode::Bisection] {
        let sol = prog.solve(&SolveSettings {
            mode,
            ..SolveSettings::default()
        })?;
        println!(
            "{mode:?}: {} t={:.6} x={:.6} (expected ln(sqrt(3)) = {:.6}), residual {:.1e}",
            sol.status,
            sol.value(t).unwrap(),
            sol.value(x).unwrap(),
            3f64.sqrt().ln(),
            sol.residual
        );
    }
    Ok(())
}
