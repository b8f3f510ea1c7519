use crate::Vector;

/// Euclidean projection onto the probability simplex `{y ≥ 0, Σy = 1}`
/// (sort and threshold).
pub fn project_simplex(v: &Vector) -> Vector {
    let d = v.len();
    if d == 0 {
        return v.clone();
    }
    let mut u: Vec<f64> = v.iter().copied().collect();
    u.sort_by(|a, b| b.total_cmp(a));
    let mut cumsum = 0.0;
    let mut theta = 0.0;
    for (j, &uj) in u.iter().enumerate() {
        cumsum += uj;
        let t = (cumsum - 1.0) / (j + 1) as f64;
        if uj - t > 0.0 {
            theta = t;
        }
    }
    v.map(|x| (x - theta).max(0.0))
}
