use fde_core::*;
use std::time::Instant;

fn main() {
    let pr = ProblemParams::new(3, 0.1, 1.0, 1.0).unwrap();
    let t0 = Instant::now();
    let base = Profile::compute(&pr, 1000.0, 1e-10).unwrap();
    let k0 = extract_k0(&base).unwrap();
    println!("K0 = {:.12} ({:.2?})", k0, t0.elapsed());

    let t1 = Instant::now();
    let cfg = ConvergenceConfig::defaults(k0, 1.0);
    let report = convergence_run(&pr, k0, &cfg).unwrap();
    println!("lambda1 = {}, run time {:.2?}", report.lambda1, t1.elapsed());
    for i in 0..report.times.len() {
        println!("t={:5.2}  l1={:.6e}  sup={:.6e}  center={:.8}", report.times[i], report.l1_dist[i], report.sup_dist[i], report.center_vals[i]);
    }
    println!("center rel err final = {:.4e}", report.center_rel_err_final);
    println!("l1 decreasing final half: {}", report.l1_decreasing_final_half);
    println!("sup decreasing final half: {}", report.sup_decreasing_final_half);
}
