//! Maximum spanning arborescence (Chu-Liu/Edmonds) and its restriction to the parts
//! that survive segmentation.

use crate::error::{Error, Result};

/// Total weight of the arborescence given by `parent`, summed in child order.
pub fn arborescence_weight(w: &[Vec<f64>], parent: &[Option<usize>]) -> f64 {
    parent
        .iter()
        .enumerate()
        .filter_map(|(c, p)| p.map(|p| w[p][c]))
        .sum()
}

#[derive(Clone, Copy)]
struct Edge {
    from: usize,
    to: usize,
    w: f64,
    /// Index of the original edge this one stands for.
    id: usize,
}

/// Maximum-weight arborescence over edges on `n` nodes rooted at `root`; returns the
/// chosen original edge ids. Every non-root node must be reachable.
fn edmonds(n: usize, root: usize, edges: &[Edge]) -> Option<Vec<usize>> {
    // best incoming edge per node, ties to the earliest edge
    let mut best: Vec<Option<usize>> = vec![None; n];
    for (k, e) in edges.iter().enumerate() {
        if e.to == root || e.from == e.to {
            continue;
        }
        if best[e.to].is_none_or(|b| e.w > edges[b].w) {
            best[e.to] = Some(k);
        }
    }
    if (0..n).any(|v| v != root && best[v].is_none()) {
        return None;
    }
    // find cycles among the chosen edges
    let mut comp = vec![usize::MAX; n];
    let mut visit = vec![usize::MAX; n];
    let mut n_comp = 0;
    let mut has_cycle = false;
    for start in 0..n {
        let mut v = start;
        while v != root && visit[v] == usize::MAX && comp[v] == usize::MAX {
            visit[v] = start;
            v = edges[best[v].expect("checked")].from;
        }
        if v != root && visit[v] == start && comp[v] == usize::MAX {
            has_cycle = true;
            let mut u = v;
            loop {
                comp[u] = n_comp;
                u = edges[best[u].expect("checked")].from;
                if u == v {
                    break;
                }
            }
            n_comp += 1;
        }
    }
    if !has_cycle {
        return Some((0..n).filter(|&v| v != root).map(|v| best[v].expect("checked")).collect());
    }
    for c in comp.iter_mut() {
        if *c == usize::MAX {
            *c = n_comp;
            n_comp += 1;
        }
    }
    let in_cycle = |v: usize| best[v].is_some() && {
        // v is on a cycle iff its component has more than one node or a self-loop
        let c = comp[v];
        (0..n).filter(|&u| comp[u] == c).count() > 1
    };
    let mut contracted = Vec::new();
    let mut origin = Vec::new();
    for (k, e) in edges.iter().enumerate() {
        let (a, b) = (comp[e.from], comp[e.to]);
        if a == b {
            continue;
        }
        let w = if in_cycle(e.to) { e.w - edges[best[e.to].expect("checked")].w } else { e.w };
        contracted.push(Edge { from: a, to: b, w, id: contracted.len() });
        origin.push(k);
    }
    let chosen = edmonds(n_comp, comp[root], &contracted)?;
    let mut picked: Vec<usize> = chosen.iter().map(|&c| origin[c]).collect();
    // expand: each cycle keeps all its edges except the one into the node that the
    // contracted solution enters through
    let entered: Vec<usize> = picked.iter().map(|&k| edges[k].to).collect();
    for v in 0..n {
        if v == root || !in_cycle(v) {
            continue;
        }
        if !entered.contains(&v) {
            picked.push(best[v].expect("checked"));
        }
    }
    Some(picked.into_iter().map(|k| edges[k].id).collect())
}

/// Maximum spanning arborescence of the complete digraph with weight `w[i][j]` on
/// edge `i -> j`, rooted at `root`.
pub fn max_arborescence(w: &[Vec<f64>], root: usize) -> Result<Vec<Option<usize>>> {
    let n = w.len();
    if root >= n || w.iter().any(|r| r.len() != n) {
        return Err(Error::invalid("weight matrix must be square and contain the root"));
    }
    if w.iter().flatten().any(|v| !v.is_finite()) {
        return Err(Error::Numerical("non-finite arborescence weight".into()));
    }
    let mut edges = Vec::new();
    for (i, row) in w.iter().enumerate() {
        for (j, &x) in row.iter().enumerate() {
            if i != j && j != root {
                edges.push(Edge { from: i, to: j, w: x, id: edges.len() });
            }
        }
    }
    let chosen = edmonds(n, root, &edges).expect("complete digraph is always spanned");
    let mut parent = vec![None; n];
    for k in chosen {
        parent[edges[k].to] = Some(edges[k].from);
    }
    Ok(parent)
}

/// Best arborescence over all roots (ties to the smallest root).
pub fn best_arborescence(w: &[Vec<f64>]) -> Result<(Vec<Option<usize>>, f64)> {
    if w.is_empty() {
        return Err(Error::invalid("empty weight matrix"));
    }
    let mut best: Option<(Vec<Option<usize>>, f64)> = None;
    for root in 0..w.len() {
        let parent = max_arborescence(w, root)?;
        let total = arborescence_weight(w, &parent);
        if best.as_ref().is_none_or(|(_, b)| total > *b) {
            best = Some((parent, total));
        }
    }
    Ok(best.expect("at least one root"))
}

/// Kinematic tree over the present queries.
#[derive(Clone, Debug, PartialEq)]
pub struct KinematicTree {
    /// Present query ids, sorted.
    pub nodes: Vec<usize>,
    /// Parent query of each entry of `nodes`.
    pub parent: Vec<Option<usize>>,
    pub base: usize,
}

/// Restricts a spanning arborescence on all queries to `present` by ancestor path
/// contraction.
pub fn contract(full_parent: &[Option<usize>], present: &[usize]) -> Result<KinematicTree> {
    if present.is_empty() {
        return Err(Error::invalid("no present parts"));
    }
    let is_present = |q: usize| present.binary_search(&q).is_ok();
    let mut parent: Vec<Option<usize>> = present
        .iter()
        .map(|&q| {
            let mut a = full_parent[q];
            let mut guard = 0;
            while let Some(x) = a {
                if is_present(x) {
                    return Some(x);
                }
                a = full_parent[x];
                guard += 1;
                if guard > full_parent.len() {
                    break;
                }
            }
            None
        })
        .collect();
    let roots: Vec<usize> = (0..present.len()).filter(|&k| parent[k].is_none()).collect();
    let base_idx = if roots.len() == 1 {
        roots[0]
    } else {
        let subtree = |r: usize| -> usize {
            (0..present.len())
                .filter(|&k| {
                    let mut a = Some(present[k]);
                    while let Some(x) = a {
                        if x == present[r] {
                            return true;
                        }
                        a = parent[present.binary_search(&x).expect("present")];
                    }
                    false
                })
                .count()
        };
        let mut best = roots[0];
        for &r in &roots[1..] {
            if subtree(r) > subtree(best) {
                best = r;
            }
        }
        log::warn!(
            "{} present parts have no present ancestor; attaching them to query {}",
            roots.len(),
            present[best]
        );
        for &r in &roots {
            if r != best {
                parent[r] = Some(present[best]);
            }
        }
        best
    };
    Ok(KinematicTree {
        nodes: present.to_vec(),
        parent,
        base: present[base_idx],
    })
}

/// Best arborescence of `kin_logits` over all queries, restricted to `present`.
pub fn extract_kinematic_tree(kin_logits: &[Vec<f64>], present: &[usize]) -> Result<KinematicTree> {
    let (full, _) = best_arborescence(kin_logits)?;
    contract(&full, present)
}
