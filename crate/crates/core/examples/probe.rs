use scalflow_core::*;
fn main() {
    let cap1 = models::glue_cap(3, 12, 0.1, 0.35);
    let prof1 = models::annulus_profile(&cap1, 0.22, 0.1, 1e-300);
    let zero = field::ScalarField::zeros(cap1.chart());
    let mut dcfg = deform::DeformConfig::default();
    dcfg.order = geometry::FdOrder::Two;
    let rep = deform::deform(&cap1, &prof1, &zero, -3e-5, 1e-9, 16, &dcfg).unwrap();
    let chart = cap1.chart();
    let mut count = 0;
    for i in 0..chart.n_nodes() {
        if !prof1.clamped[i] { continue; }
        for c in 0..6 {
            let a = cap1.at(i)[c]; let b = rep.final_metric.at(i)[c];
            if a.to_bits() != b.to_bits() {
                if count < 5 {
                    let mut multi = [0usize; 3];
                    chart.multi_index(i, &mut multi);
                    let mut x = [0.0; 3];
                    chart.coords(i, &mut x);
                    println!("node {i} {multi:?} x={x:?} c={c}: {a:e} ({:#x}) vs {b:e} dist={} rho={:e}",
                        a.to_bits(), prof1.dist.data[i], prof1.rho.data[i]);
                }
                count += 1;
            }
        }
    }
    println!("total differing entries on clamped band: {count}");
}
