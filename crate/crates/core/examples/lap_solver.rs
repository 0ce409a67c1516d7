//! Solve a small linear assignment problem and the score-weighted surrogate.
//!
//! cargo run --example lap_solver

use permreg::assignment::{build_cost_matrix, hungarian_solve, CostMatrix};

fn main() -> permreg::Result<()> {
    let c = CostMatrix::new(
        4,
        vec![
            9.0, 2.0, 7.0, 8.0, 6.0, 4.0, 3.0, 7.0, 5.0, 8.0, 1.0, 8.0, 7.0, 6.0, 9.0, 4.0,
        ],
    )?;
    let sol = hungarian_solve(&c);
    println!("columns  {:?}", sol.columns);
    println!("cost     {}", sol.objective);
    let dual: f64 = sol.row_duals.iter().chain(&sol.col_duals).sum();
    println!("dual     {dual} (equal at the optimum)");

    // Residual costs with an off-diagonal penalty and a diagonal credit.
    let y = [1.0, 2.0, 3.0, 4.0];
    let fit = [1.1, 3.1, 1.9, 4.0];
    for (lam1, lam2) in [(0.0, 0.0), (0.5, 0.5), (5.0, 0.9)] {
        let omega = build_cost_matrix(&y, &fit, lam1, lam2)?;
        let a = hungarian_solve(&omega).assignment;
        println!("lam1 = {lam1:<3} lam2 = {lam2:<3} -> moved {:?}", a.moved());
    }
    Ok(())
}
