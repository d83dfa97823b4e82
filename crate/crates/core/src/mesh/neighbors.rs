use super::{Mesh, MeshError, MeshResult};
use std::collections::BTreeSet;

/// `k` vertices around `v` that a surface walk may step to.
///
/// Candidates are the 2-ring of `v` ranked by Euclidean distance (ties to the
/// smaller index). When the 2-ring holds fewer than `k` vertices the remainder
/// is filled from the global Euclidean nearest neighbors.
pub fn surface_neighbors(mesh: &Mesh, v: usize, k: usize) -> MeshResult<Vec<usize>> {
    let adj = mesh.adjacency();
    let mut ring: BTreeSet<usize> = BTreeSet::new();
    for &a in &adj[v] {
        ring.insert(a);
        ring.extend(adj[a].iter().copied());
    }
    ring.remove(&v);

    let origin = mesh.vertices()[v];
    let mut ranked: Vec<(f64, usize)> = ring
        .into_iter()
        .map(|j| ((mesh.vertices()[j] - origin).norm_squared(), j))
        .collect();
    ranked.sort_by(|a, b| a.0.total_cmp(&b.0).then(a.1.cmp(&b.1)));
    let mut out: Vec<usize> = ranked.into_iter().take(k).map(|(_, j)| j).collect();

    if out.len() < k {
        for (j, _) in mesh.index().knn(&origin, k + out.len() + 1) {
            if out.len() == k {
                break;
            }
            if j != v && !out.contains(&j) {
                out.push(j);
            }
        }
    }
    if out.is_empty() {
        return Err(MeshError::IsolatedVertex(v));
    }
    Ok(out)
}
