//! Integrates the pendulum forward for 20 time units and back again under
//! the negated field.

use hamiltonian_nn::dynamics::{
    integrate_adaptive, AnalyticSystem, Negated, PhasePoint, Symplectic,
};

fn main() -> hamiltonian_nn::Result<()> {
    let sys = AnalyticSystem::Pendulum {
        m: 1.0,
        g: 3.0,
        l: 1.0,
    };
    let field = Symplectic(&sys);
    let x0 = PhasePoint::new(vec![1.0], vec![0.5])?;
    let t: Vec<f64> = (0..=200).map(|i| i as f64 * 0.1).collect();
    let fwd = integrate_adaptive(&field, &x0, &t, 1e-10)?;
    let back = integrate_adaptive(&Negated(&field), fwd.last(), &t, 1e-10)?;
    let end = back.last();
    println!("start {:?}", x0.to_flat());
    println!("after {:?}", fwd.last().to_flat());
    println!("back  {:?}", end.to_flat());
    println!(
        "gap   {:.2e}",
        (end.q[0] - x0.q[0]).abs().max((end.p[0] - x0.p[0]).abs())
    );
    Ok(())
}
