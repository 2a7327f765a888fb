//! Phase classification of gridded domains by gradient rank, connected
//! components, interface extraction, and the per-phase verification battery:
//! eikonal constancy on full-rank components, rank-one fits with
//! straight-segment image checks, and scalar residuals of fitted profiles.

use std::collections::HashMap;

use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::grid::Grid;
use crate::map::Jet2;
use crate::map::MapInstance;
use crate::residual::{eikonal_deviation, scalar_residual_at, ResidualField};
use crate::tensor::{estimate_rank, svd, vec_dot, vec_norm, Matrix, Tensor3};

/// Default confidence floor on the rank-decision margin; nodes below it are
/// treated as interface.
pub const DEFAULT_MARGIN_FLOOR: f64 = 10.0;

/// Chebyshev radius of the window used to detect junction nodes: wide enough
/// to see across a three-node interface band plus the eroded component ring.
const JUNCTION_RADIUS: usize = 3;

/// Final label of a grid node.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum NodeLabel {
    /// Open-phase node with the given gradient rank (rank 0 is merged into
    /// the rank-one phase).
    Phase(usize),
    Interface,
}

/// One connected constant-rank component.
#[derive(Debug, Clone)]
pub struct PhaseComponent {
    pub id: usize,
    /// Common rank label of the member nodes.
    pub label: usize,
    pub nodes: Vec<usize>,
    /// Whether the component touches the grid boundary (open-set claims
    /// concern interior behavior).
    pub boundary_truncated: bool,
    /// Components reachable across an interface set.
    pub adjacent: Vec<usize>,
}

/// Classified grid: per-node labels, rank evidence, components and the
/// connected interface sets.
#[derive(Debug, Clone)]
pub struct PhaseMap {
    pub grid: Grid,
    pub labels: Vec<NodeLabel>,
    /// Rank decisions before the zero-rank merge and interface relabeling.
    pub raw_ranks: Vec<usize>,
    pub margins: Vec<f64>,
    pub sigma1: Vec<f64>,
    pub du_norm_sq: Vec<f64>,
    pub low_confidence: Vec<bool>,
    pub components: Vec<PhaseComponent>,
    pub component_of: Vec<Option<usize>>,
    pub interface_sets: Vec<Vec<usize>>,
    pub tau_abs: f64,
    pub tau_rel: f64,
    pub margin_floor: f64,
}

/// Label every node by the numerical rank of the gradient, relabel interface
/// nodes (rank change across an axis neighbor, or a low-confidence margin),
/// and extract connected components with adjacency.
pub fn classify(
    map: &MapInstance,
    grid: &Grid,
    tau_abs: f64,
    tau_rel: f64,
    margin_floor: f64,
) -> Result<PhaseMap> {
    struct NodeData {
        rank: usize,
        margin: f64,
        sigma1: f64,
        du_norm_sq: f64,
    }

    let nodes: Vec<NodeData> = (0..grid.node_count())
        .into_par_iter()
        .map(|idx| {
            let point = grid.coords(idx);
            let (du, _) = map
                .second_order_at(&point)
                .map_err(|e| Error::EvalFailure {
                    point: point.clone(),
                    reason: e.to_string(),
                })?;
            let decision =
                estimate_rank(&du, tau_abs, tau_rel).map_err(|e| Error::EvalFailure {
                    point,
                    reason: e.to_string(),
                })?;
            Ok(NodeData {
                rank: decision.rank,
                margin: decision.margin,
                sigma1: decision.singular_values.first().copied().unwrap_or(0.0),
                du_norm_sq: du.frobenius_sq(),
            })
        })
        .collect::<Result<Vec<_>>>()?;

    let raw_ranks: Vec<usize> = nodes.iter().map(|n| n.rank).collect();
    let margins: Vec<f64> = nodes.iter().map(|n| n.margin).collect();
    let sigma1: Vec<f64> = nodes.iter().map(|n| n.sigma1).collect();
    let du_norm_sq: Vec<f64> = nodes.iter().map(|n| n.du_norm_sq).collect();
    let low_confidence: Vec<bool> = margins.iter().map(|&m| m < margin_floor).collect();

    // rank 0 merges into the rank <= 1 phase
    let effective: Vec<usize> = raw_ranks.iter().map(|&r| r.max(1)).collect();

    let labels: Vec<NodeLabel> = (0..grid.node_count())
        .into_par_iter()
        .map(|idx| {
            if low_confidence[idx]
                || grid
                    .axis_neighbors(idx)
                    .iter()
                    .any(|&nb| effective[nb] != effective[idx])
            {
                NodeLabel::Interface
            } else {
                NodeLabel::Phase(effective[idx])
            }
        })
        .collect();

    // flood fill over equal-label phase nodes, axis connectivity
    let mut component_of: Vec<Option<usize>> = vec![None; grid.node_count()];
    let mut components: Vec<PhaseComponent> = Vec::new();
    let mut stack = Vec::new();
    for start in 0..grid.node_count() {
        let NodeLabel::Phase(label) = labels[start] else {
            continue;
        };
        if component_of[start].is_some() {
            continue;
        }
        let id = components.len();
        let mut member_nodes = Vec::new();
        let mut boundary_truncated = false;
        stack.push(start);
        component_of[start] = Some(id);
        while let Some(node) = stack.pop() {
            member_nodes.push(node);
            if grid.is_boundary(node) {
                boundary_truncated = true;
            }
            for nb in grid.axis_neighbors(node) {
                if component_of[nb].is_none() && labels[nb] == NodeLabel::Phase(label) {
                    component_of[nb] = Some(id);
                    stack.push(nb);
                }
            }
        }
        member_nodes.sort_unstable();
        components.push(PhaseComponent {
            id,
            label,
            nodes: member_nodes,
            boundary_truncated,
            adjacent: Vec::new(),
        });
    }

    // connected interface sets, axis connectivity
    let mut interface_sets: Vec<Vec<usize>> = Vec::new();
    let mut seen = vec![false; grid.node_count()];
    for start in 0..grid.node_count() {
        if labels[start] != NodeLabel::Interface || seen[start] {
            continue;
        }
        let mut set = Vec::new();
        stack.push(start);
        seen[start] = true;
        while let Some(node) = stack.pop() {
            set.push(node);
            for nb in grid.axis_neighbors(node) {
                if !seen[nb] && labels[nb] == NodeLabel::Interface {
                    seen[nb] = true;
                    stack.push(nb);
                }
            }
        }
        set.sort_unstable();
        interface_sets.push(set);
    }

    // component adjacency via interface sets
    for set in &interface_sets {
        let mut touching: Vec<usize> = set
            .iter()
            .flat_map(|&node| grid.axis_neighbors(node))
            .filter_map(|nb| component_of[nb])
            .collect();
        touching.sort_unstable();
        touching.dedup();
        for &a in &touching {
            for &b in &touching {
                if a != b && !components[a].adjacent.contains(&b) {
                    components[a].adjacent.push(b);
                }
            }
        }
    }
    for c in &mut components {
        c.adjacent.sort_unstable();
    }

    Ok(PhaseMap {
        grid: grid.clone(),
        labels,
        raw_ranks,
        margins,
        sigma1,
        du_norm_sq,
        low_confidence,
        components,
        component_of,
        interface_sets,
        tau_abs,
        tau_rel,
        margin_floor,
    })
}

impl PhaseMap {
    pub fn component(&self, id: usize) -> Result<&PhaseComponent> {
        self.components.get(id).ok_or(Error::NoSuchComponent(id))
    }

    /// Components carrying a given rank label, by id.
    pub fn components_with_label(&self, label: usize) -> Vec<usize> {
        self.components
            .iter()
            .filter(|c| c.label == label)
            .map(|c| c.id)
            .collect()
    }

    pub fn interface_node_count(&self) -> usize {
        self.labels
            .iter()
            .filter(|l| **l == NodeLabel::Interface)
            .count()
    }
}

/// Eikonal constancy on a full-rank component: `(fitted C^2, max deviation)`
/// of `|Du|^2` over the component's nodes.
pub fn verify_eikonal(
    pm: &PhaseMap,
    component_id: usize,
    field: &ResidualField,
) -> Result<(f64, f64)> {
    let component = pm.component(component_id)?;
    let full_rank = pm.grid.dim();
    if component.label != full_rank {
        return Err(Error::WrongComponentRank {
            component: component_id,
            rank: component.label,
            required: format!("{full_rank}"),
        });
    }
    if field.samples.len() != pm.grid.node_count() {
        return Err(Error::ShapeMismatch {
            expected: format!("residual field with {} samples", pm.grid.node_count()),
            actual: format!("{}", field.samples.len()),
        });
    }
    let samples: Vec<f64> = component
        .nodes
        .iter()
        .map(|&n| field.samples[n].du_norm_sq)
        .collect();
    eikonal_deviation(&samples)
}

/// Rank-one representation fitted on a component: target-space direction,
/// base point, scalar samples and the worst representation residual.
#[derive(Debug, Clone)]
pub struct RankOneFit {
    pub component: usize,
    /// Anchor node (largest leading singular value on the component).
    pub anchor: usize,
    pub anchor_value: Vec<f64>,
    pub offset: Vec<f64>,
    /// Unit direction, sign-fixed so its first entry of significant size is
    /// positive.
    pub direction: Vec<f64>,
    pub f_samples: Vec<(usize, f64)>,
    pub max_residual: f64,
    /// Set when the gradient is numerically zero across the component (the
    /// map is constant there and the direction is a placeholder).
    pub degenerate: bool,
}

/// Fit `u = a + xi f` on a rank <= 1 component: `xi` is the dominant left
/// singular vector at the best-conditioned node, `a` the transversal part of
/// the anchor value, `f` the projection of `u - a` onto `xi`.
pub fn fit_rank_one(map: &MapInstance, pm: &PhaseMap, component_id: usize) -> Result<RankOneFit> {
    let component = pm.component(component_id)?;
    if component.label > 1 {
        return Err(Error::WrongComponentRank {
            component: component_id,
            rank: component.label,
            required: "<= 1".into(),
        });
    }

    let anchor = *component
        .nodes
        .iter()
        .max_by(|&&a, &&b| pm.sigma1[a].partial_cmp(&pm.sigma1[b]).unwrap())
        .ok_or(Error::EmptyInput)?;
    let out_dim = map.dims().0;

    let degenerate = pm.sigma1[anchor] <= pm.tau_abs;
    let anchor_value = map.value(&pm.grid.coords(anchor))?;

    let direction = if degenerate {
        let mut e = vec![0.0; out_dim];
        e[0] = 1.0;
        e
    } else {
        let jet = map.jet(&pm.grid.coords(anchor))?;
        let decomposition = svd(&jet.gradient)?;
        let mut xi = decomposition.u.column(0);
        if let Some(first) = xi.iter().find(|v| v.abs() > 1e-12) {
            if *first < 0.0 {
                xi.iter_mut().for_each(|v| *v = -*v);
            }
        }
        xi
    };

    let projected = vec_dot(&direction, &anchor_value);
    let offset: Vec<f64> = anchor_value
        .iter()
        .zip(&direction)
        .map(|(u, xi)| u - xi * projected)
        .collect();

    let values: Vec<(usize, Vec<f64>)> = component
        .nodes
        .par_iter()
        .map(|&node| {
            let point = pm.grid.coords(node);
            let value = map.value(&point).map_err(|e| Error::EvalFailure {
                point,
                reason: e.to_string(),
            })?;
            Ok((node, value))
        })
        .collect::<Result<Vec<_>>>()?;

    let mut f_samples = Vec::with_capacity(values.len());
    let mut max_residual: f64 = 0.0;
    for (node, u) in values {
        let centered: Vec<f64> = u.iter().zip(&offset).map(|(v, a)| v - a).collect();
        let f = vec_dot(&direction, &centered);
        let residual: Vec<f64> = centered
            .iter()
            .zip(&direction)
            .map(|(c, xi)| c - xi * f)
            .collect();
        max_residual = max_residual.max(vec_norm(&residual));
        f_samples.push((node, f));
    }

    Ok(RankOneFit {
        component: component_id,
        anchor,
        anchor_value,
        offset,
        direction,
        f_samples,
        max_residual,
        degenerate,
    })
}

/// Result of the scalar residual check on a fitted profile.
#[derive(Debug, Clone)]
pub struct ScalarHarmonicCheck {
    /// Sup of the scalar residual over interior nodes, when checkable.
    pub sup_residual: Option<f64>,
    pub interior_nodes: usize,
    /// Reason the check could not run (thin component), if any.
    pub not_checkable: Option<String>,
}

impl ScalarHarmonicCheck {
    pub fn is_checkable(&self) -> bool {
        self.not_checkable.is_none()
    }
}

/// Build finite-difference jets of the fitted scalar on the component's
/// interior nodes (full stencil inside the component) and return the sup of
/// the scalar residual. Components thinner than five nodes across are
/// reported as not checkable rather than failed.
pub fn verify_scalar_infinity_harmonic(
    pm: &PhaseMap,
    fit: &RankOneFit,
) -> Result<ScalarHarmonicCheck> {
    let component = pm.component(fit.component)?;
    let dim = pm.grid.dim();
    let f_by_node: HashMap<usize, f64> = fit.f_samples.iter().copied().collect();

    // bounding box of the component in index space
    let mut lo = vec![usize::MAX; dim];
    let mut hi = vec![0usize; dim];
    for &node in &component.nodes {
        let multi = pm.grid.multi_index(node);
        for d in 0..dim {
            lo[d] = lo[d].min(multi[d]);
            hi[d] = hi[d].max(multi[d]);
        }
    }
    for d in 0..dim {
        if hi[d] - lo[d] + 1 < 5 {
            return Ok(ScalarHarmonicCheck {
                sup_residual: None,
                interior_nodes: 0,
                not_checkable: Some(format!(
                    "component spans only {} nodes along axis {d}",
                    hi[d] - lo[d] + 1
                )),
            });
        }
    }

    let spacings: Vec<f64> = pm.grid.axes().iter().map(|a| a.spacing()).collect();
    let offset_node =
        |multi: &[usize], d1: usize, s1: isize, d2: usize, s2: isize| -> Option<usize> {
            let mut m = multi.to_vec();
            for (d, s) in [(d1, s1), (d2, s2)] {
                let k = m[d] as isize + s;
                if k < 0 || k as usize >= pm.grid.axes()[d].count {
                    return None;
                }
                m[d] = k as usize;
            }
            let node = pm.grid.linear_index(&m);
            f_by_node.contains_key(&node).then_some(node)
        };

    let mut sup: f64 = 0.0;
    let mut interior = 0usize;
    'nodes: for &node in &component.nodes {
        let multi = pm.grid.multi_index(node);
        let f0 = f_by_node[&node];

        let mut gradient = Matrix::zeros(1, dim);
        let mut hessian = Tensor3::zeros(1, dim);
        for d in 0..dim {
            let (Some(plus), Some(minus)) = (
                offset_node(&multi, d, 1, d, 0),
                offset_node(&multi, d, -1, d, 0),
            ) else {
                continue 'nodes;
            };
            let h = spacings[d];
            gradient[(0, d)] = (f_by_node[&plus] - f_by_node[&minus]) / (2.0 * h);
            hessian[(0, d, d)] = (f_by_node[&plus] - 2.0 * f0 + f_by_node[&minus]) / (h * h);
        }
        for d1 in 0..dim {
            for d2 in (d1 + 1)..dim {
                let (Some(pp), Some(pm_), Some(mp), Some(mm)) = (
                    offset_node(&multi, d1, 1, d2, 1),
                    offset_node(&multi, d1, 1, d2, -1),
                    offset_node(&multi, d1, -1, d2, 1),
                    offset_node(&multi, d1, -1, d2, -1),
                ) else {
                    continue 'nodes;
                };
                let v = (f_by_node[&pp] - f_by_node[&pm_] - f_by_node[&mp] + f_by_node[&mm])
                    / (4.0 * spacings[d1] * spacings[d2]);
                hessian[(0, d1, d2)] = v;
                hessian[(0, d2, d1)] = v;
            }
        }

        let jet = Jet2 {
            value: vec![f0],
            gradient,
            hessian,
        };
        sup = sup.max(scalar_residual_at(&jet)?.abs());
        interior += 1;
    }

    if interior == 0 {
        return Ok(ScalarHarmonicCheck {
            sup_residual: None,
            interior_nodes: 0,
            not_checkable: Some("component has no interior nodes for the stencil".into()),
        });
    }
    Ok(ScalarHarmonicCheck {
        sup_residual: Some(sup),
        interior_nodes: interior,
        not_checkable: None,
    })
}

/// Largest distance from the image of the fit's component to the fitted line
/// `{a + t xi}` (or to the anchor value for degenerate fits).
pub fn line_fit_image(map: &MapInstance, pm: &PhaseMap, fit: &RankOneFit) -> Result<f64> {
    let component = pm.component(fit.component)?;
    let distances: Vec<f64> = component
        .nodes
        .par_iter()
        .map(|&node| {
            let point = pm.grid.coords(node);
            let u = map.value(&point).map_err(|e| Error::EvalFailure {
                point,
                reason: e.to_string(),
            })?;
            let d = if fit.degenerate {
                let diff: Vec<f64> = u
                    .iter()
                    .zip(&fit.anchor_value)
                    .map(|(a, b)| a - b)
                    .collect();
                vec_norm(&diff)
            } else {
                let centered: Vec<f64> = u.iter().zip(&fit.offset).map(|(v, a)| v - a).collect();
                let t = vec_dot(&fit.direction, &centered);
                let residual: Vec<f64> = centered
                    .iter()
                    .zip(&fit.direction)
                    .map(|(c, xi)| c - xi * t)
                    .collect();
                vec_norm(&residual)
            };
            Ok(d)
        })
        .collect::<Result<Vec<_>>>()?;
    Ok(distances.into_iter().fold(0.0, f64::max))
}

/// Statistics of one connected interface set.
#[derive(Debug, Clone)]
pub struct InterfaceSetReport {
    pub nodes: Vec<usize>,
    pub du_norm_sq_mean: f64,
    pub du_norm_sq_max_dev: f64,
    /// Most frequent raw rank among member nodes (smallest on ties).
    pub dominant_rank: usize,
    /// `(component id, rank label)` of phase components touching the set.
    pub adjacent_components: Vec<(usize, usize)>,
}

#[derive(Debug, Clone)]
pub struct InterfaceReport {
    pub sets: Vec<InterfaceSetReport>,
    /// Interface nodes around which at least three distinct phase components
    /// meet (within a Chebyshev window).
    pub junction_nodes: Vec<usize>,
}

/// Per-interface-set statistics plus junction detection.
pub fn interface_report(pm: &PhaseMap, field: &ResidualField) -> Result<InterfaceReport> {
    if field.samples.len() != pm.grid.node_count() {
        return Err(Error::ShapeMismatch {
            expected: format!("residual field with {} samples", pm.grid.node_count()),
            actual: format!("{}", field.samples.len()),
        });
    }

    let mut sets = Vec::with_capacity(pm.interface_sets.len());
    for nodes in &pm.interface_sets {
        let du: Vec<f64> = nodes.iter().map(|&n| field.samples[n].du_norm_sq).collect();
        let (mean, max_dev) = eikonal_deviation(&du)?;

        let mut counts: HashMap<usize, usize> = HashMap::new();
        for &n in nodes {
            *counts.entry(pm.raw_ranks[n]).or_default() += 1;
        }
        let dominant_rank = counts
            .iter()
            .map(|(&rank, &count)| (count, std::cmp::Reverse(rank)))
            .max()
            .map(|(_, std::cmp::Reverse(rank))| rank)
            .unwrap_or(0);

        let mut adjacent: Vec<(usize, usize)> = nodes
            .iter()
            .flat_map(|&node| pm.grid.axis_neighbors(node))
            .filter_map(|nb| pm.component_of[nb])
            .map(|id| (id, pm.components[id].label))
            .collect();
        adjacent.sort_unstable();
        adjacent.dedup();

        sets.push(InterfaceSetReport {
            nodes: nodes.clone(),
            du_norm_sq_mean: mean,
            du_norm_sq_max_dev: max_dev,
            dominant_rank,
            adjacent_components: adjacent,
        });
    }

    let junction_nodes = find_junctions(pm);
    Ok(InterfaceReport {
        sets,
        junction_nodes,
    })
}

/// Interface nodes seeing at least three distinct phase components inside a
/// Chebyshev window of radius `JUNCTION_RADIUS`.
fn find_junctions(pm: &PhaseMap) -> Vec<usize> {
    let dim = pm.grid.dim();
    let counts: Vec<usize> = pm.grid.axes().iter().map(|a| a.count).collect();
    let mut junctions = Vec::new();

    for node in 0..pm.grid.node_count() {
        if pm.labels[node] != NodeLabel::Interface {
            continue;
        }
        let multi = pm.grid.multi_index(node);
        let mut seen: Vec<usize> = Vec::new();

        // odometer over the window
        let lo: Vec<usize> = multi
            .iter()
            .map(|&k| k.saturating_sub(JUNCTION_RADIUS))
            .collect();
        let hi: Vec<usize> = multi
            .iter()
            .zip(&counts)
            .map(|(&k, &c)| (k + JUNCTION_RADIUS).min(c - 1))
            .collect();
        let mut cursor = lo.clone();
        'window: loop {
            let idx = pm.grid.linear_index(&cursor);
            if let Some(comp) = pm.component_of[idx] {
                if !seen.contains(&comp) {
                    seen.push(comp);
                    if seen.len() >= 3 {
                        junctions.push(node);
                        break 'window;
                    }
                }
            }
            let mut d = dim;
            loop {
                if d == 0 {
                    break 'window;
                }
                d -= 1;
                if cursor[d] < hi[d] {
                    cursor[d] += 1;
                    cursor[(d + 1)..dim].copy_from_slice(&lo[(d + 1)..dim]);
                    break;
                }
            }
        }
    }
    junctions
}
