//! Centroid and sum-of-squares based indexes.

use super::ClusterView;

fn centroid(points: &[Vec<f64>], members: &[usize]) -> Vec<f64> {
    let dims = points[0].len();
    let mut c = vec![0.0; dims];
    for &i in members {
        for t in 0..dims {
            c[t] += points[i][t];
        }
    }
    for v in c.iter_mut() {
        *v /= members.len() as f64;
    }
    c
}

fn global_centroid(points: &[Vec<f64>], view: &ClusterView) -> Vec<f64> {
    centroid(points, &view.core)
}

fn dist(a: &[f64], b: &[f64]) -> f64 {
    sq_dist(a, b).sqrt()
}

fn sq_dist(a: &[f64], b: &[f64]) -> f64 {
    let mut s = 0.0;
    for t in 0..a.len() {
        let d = a[t] - b[t];
        s += d * d;
    }
    s
}

/// Within-cluster and between-cluster sums of squares.
fn scatter(points: &[Vec<f64>], view: &ClusterView) -> (f64, f64) {
    let overall = global_centroid(points, view);
    let mut w = 0.0;
    let mut b = 0.0;
    for members in &view.clusters {
        let c = centroid(points, members);
        for &i in members {
            w += sq_dist(&points[i], &c);
        }
        b += members.len() as f64 * sq_dist(&c, &overall);
    }
    (w, b)
}

/// Variance ratio criterion: (B/(k-1)) / (W/(N-k)).
pub(crate) fn vrc(points: &[Vec<f64>], view: &ClusterView) -> f64 {
    let (w, b) = scatter(points, view);
    let k = view.k() as f64;
    let n = view.n_prime() as f64;
    (b / (k - 1.0)) / (w / (n - k))
}

/// k * W / B.
pub(crate) fn wb(points: &[Vec<f64>], view: &ClusterView) -> f64 {
    let (w, b) = scatter(points, view);
    view.k() as f64 * w / b
}

/// Mean over clusters of the worst (S_i + S_j) / M_ij ratio, with S the
/// mean point-to-centroid distance and M the centroid gap.
pub(crate) fn davies_bouldin(points: &[Vec<f64>], view: &ClusterView) -> f64 {
    let k = view.k();
    let centers: Vec<Vec<f64>> = view.clusters.iter().map(|m| centroid(points, m)).collect();
    let spread: Vec<f64> = view
        .clusters
        .iter()
        .zip(centers.iter())
        .map(|(m, c)| m.iter().map(|&i| dist(&points[i], c)).sum::<f64>() / m.len() as f64)
        .collect();
    let mut total = 0.0;
    for i in 0..k {
        let mut worst = f64::NEG_INFINITY;
        for j in 0..k {
            if i == j {
                continue;
            }
            let r = (spread[i] + spread[j]) / dist(&centers[i], &centers[j]);
            worst = worst.max(r);
        }
        total += worst;
    }
    total / k as f64
}

/// ((1/k) * (E_1 / E_k) * D_k)^2 with E the summed point-to-centroid
/// distances (global and per-cluster) and D_k the widest centroid gap.
pub(crate) fn pbm(points: &[Vec<f64>], view: &ClusterView) -> f64 {
    let overall = global_centroid(points, view);
    let e1: f64 = view.core.iter().map(|&i| dist(&points[i], &overall)).sum();
    let centers: Vec<Vec<f64>> = view.clusters.iter().map(|m| centroid(points, m)).collect();
    let ek: f64 = view
        .clusters
        .iter()
        .zip(centers.iter())
        .map(|(m, c)| m.iter().map(|&i| dist(&points[i], c)).sum::<f64>())
        .sum();
    let mut dk = 0.0f64;
    for i in 0..centers.len() {
        for j in (i + 1)..centers.len() {
            dk = dk.max(dist(&centers[i], &centers[j]));
        }
    }
    let v = (1.0 / view.k() as f64) * (e1 / ek) * dk;
    v * v
}

/// Crisp Xie-Beni: summed squared point-to-centroid distances over
/// N' times the smallest squared centroid separation.
pub(crate) fn xie_beni(points: &[Vec<f64>], view: &ClusterView) -> f64 {
    let centers: Vec<Vec<f64>> = view.clusters.iter().map(|m| centroid(points, m)).collect();
    let mut w = 0.0;
    for (m, c) in view.clusters.iter().zip(centers.iter()) {
        for &i in m {
            w += sq_dist(&points[i], c);
        }
    }
    let mut min_sep = f64::INFINITY;
    for i in 0..centers.len() {
        for j in (i + 1)..centers.len() {
            min_sep = min_sep.min(sq_dist(&centers[i], &centers[j]));
        }
    }
    w / (view.n_prime() as f64 * min_sep)
}

/// Mean over clusters of max(0, n_k - sum of R(i)) / N', where R(i) is the
/// ratio of the distance to the own centroid over the nearest other
/// centroid.
pub(crate) fn wemmert_gancarski(points: &[Vec<f64>], view: &ClusterView) -> f64 {
    let centers: Vec<Vec<f64>> = view.clusters.iter().map(|m| centroid(points, m)).collect();
    let mut total = 0.0;
    for (c, members) in view.clusters.iter().enumerate() {
        let mut ratio_sum = 0.0;
        for &i in members {
            let own = dist(&points[i], &centers[c]);
            let mut other = f64::INFINITY;
            for (o, center) in centers.iter().enumerate() {
                if o != c {
                    other = other.min(dist(&points[i], center));
                }
            }
            ratio_sum += own / other;
        }
        total += (members.len() as f64 - ratio_sum).max(0.0);
    }
    total / view.n_prime() as f64
}

/// Mean over attributes of sqrt(between-group SS / total SS), divided by
/// sqrt(k). Attributes with zero total variance contribute zero.
pub(crate) fn ratkowsky_lance(points: &[Vec<f64>], view: &ClusterView) -> f64 {
    let dims = points[0].len();
    let overall = global_centroid(points, view);
    let mut c_bar = 0.0;
    for t in 0..dims {
        let mut bgss = 0.0;
        for members in &view.clusters {
            let mean_t: f64 =
                members.iter().map(|&i| points[i][t]).sum::<f64>() / members.len() as f64;
            bgss += members.len() as f64 * (mean_t - overall[t]) * (mean_t - overall[t]);
        }
        let tss: f64 = view
            .core
            .iter()
            .map(|&i| (points[i][t] - overall[t]) * (points[i][t] - overall[t]))
            .sum();
        if tss > 0.0 {
            c_bar += (bgss / tss).sqrt();
        }
    }
    c_bar / dims as f64 / (view.k() as f64).sqrt()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::internal::tests::toy_dataset;
    use crate::internal::ClusterView;
    use approx::assert_abs_diff_eq;

    fn toy_view() -> (Vec<Vec<f64>>, ClusterView) {
        let (d, _, p) = toy_dataset();
        (d.points.clone(), ClusterView::new(&p))
    }

    #[test]
    fn vrc_on_toy_clusters() {
        let (pts, view) = toy_view();
        // B = 100, W = 1: (100/1) / (1/2) = 200.
        assert_abs_diff_eq!(vrc(&pts, &view), 200.0, epsilon = 1e-12);
    }

    #[test]
    fn wb_on_toy_clusters() {
        let (pts, view) = toy_view();
        assert_abs_diff_eq!(wb(&pts, &view), 2.0 * 1.0 / 100.0, epsilon = 1e-12);
    }

    #[test]
    fn davies_bouldin_on_toy_clusters() {
        let (pts, view) = toy_view();
        // Per-cluster mean dispersion 0.5, centroid gap 10.
        assert_abs_diff_eq!(davies_bouldin(&pts, &view), 0.1, epsilon = 1e-12);
    }

    #[test]
    fn pbm_on_toy_clusters() {
        let (pts, view) = toy_view();
        // E1 = 20, Ek = 2, Dk = 10, k = 2: ((1/2)(10)(10))^2 = 2500.
        assert_abs_diff_eq!(pbm(&pts, &view), 2500.0, epsilon = 1e-12);
    }

    #[test]
    fn xie_beni_on_toy_clusters() {
        let (pts, view) = toy_view();
        assert_abs_diff_eq!(xie_beni(&pts, &view), 1.0 / 400.0, epsilon = 1e-15);
    }

    #[test]
    fn wemmert_gancarski_on_toy_clusters() {
        let (pts, view) = toy_view();
        let r: f64 = 0.5 / 10.5 + 0.5 / 9.5;
        let expected = 2.0 * (2.0 - r).max(0.0) / 4.0;
        assert_abs_diff_eq!(wemmert_gancarski(&pts, &view), expected, epsilon = 1e-12);
    }

    #[test]
    fn ratkowsky_lance_on_toy_clusters() {
        let (pts, view) = toy_view();
        // BGSS = 100, TSS = 101, one attribute.
        let expected = (100.0f64 / 101.0).sqrt() / 2.0f64.sqrt();
        assert_abs_diff_eq!(ratkowsky_lance(&pts, &view), expected, epsilon = 1e-12);
    }
}
