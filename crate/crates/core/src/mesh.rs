//! Structured quadrilateral meshes for the compact-tension specimen and the
//! L-shaped plate.
//!
//! Meshes are tensor products of graded 1D axes. Inside the refinement band
//! the cells have the fine size; outside, cell sizes double away from the band
//! until they reach the coarse size. Every grid line runs through the whole
//! domain, so the mesh is conforming without hanging nodes. Elements in the
//! arms of the refinement cross are anisotropic (fine in one direction,
//! coarse in the other).

use std::collections::BTreeMap;

use crate::error::{Error, Result};
use crate::quadrature::{gauss_legendre, q1_derivatives, q1_shape};

const GEOM_EPS: f64 = 1e-12;

/// A pair of coincident edges forming a zero-width slit.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct NotchFace {
    /// Edge on the lower side of the slit (original nodes).
    pub lower: [usize; 2],
    /// Edge on the upper side (duplicated nodes; the tip node is shared).
    pub upper: [usize; 2],
}

/// Rectangular refinement region in mesh coordinates.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RefineBand {
    pub x: (f64, f64),
    pub y: (f64, f64),
}

/// How the initial crack of the compact-tension specimen is represented.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum NotchKind {
    /// No notch at all.
    None,
    /// Geometric slit by node duplication.
    Slit,
    /// No slit in the mesh; the caller seeds the notch through the initial
    /// damage field (see [`notch_initial_damage`]).
    InitialDamage,
}

/// Which edges of the compact-tension specimen are clamped and loaded.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum CtLoading {
    /// Bottom edge clamped, top edge pulled vertically: opens the notch.
    Opening,
    /// Left edge clamped, right edge pulled horizontally (parallel to the
    /// notch).
    Stretch,
}

impl CtLoading {
    /// Unit direction of the prescribed displacement.
    pub fn direction(self) -> [f64; 2] {
        match self {
            CtLoading::Opening => [0.0, 1.0],
            CtLoading::Stretch => [1.0, 0.0],
        }
    }
}

/// Geometry of the compact-tension specimen.
#[derive(Debug, Clone, PartialEq)]
pub struct CtMeshSpec {
    pub side_len: f64,
    pub coarse_h: f64,
    pub fine_h: f64,
    pub refine_band: RefineBand,
    pub notch: NotchKind,
    /// x coordinate of the notch tip; the notch runs from x = 0 at mid height.
    pub notch_tip: f64,
    pub loading: CtLoading,
}

impl CtMeshSpec {
    /// Unit square, notch to mid-span, refinement along the expected
    /// crack band.
    pub fn unit(coarse_h: f64, fine_h: f64) -> Self {
        Self {
            side_len: 1.0,
            coarse_h,
            fine_h,
            refine_band: RefineBand {
                x: (0.4, 1.0),
                y: (0.35, 0.65),
            },
            notch: NotchKind::Slit,
            notch_tip: 0.5,
            loading: CtLoading::Opening,
        }
    }
}

/// Geometry of the L-shaped plate.
#[derive(Debug, Clone, PartialEq)]
pub struct LShapeMeshSpec {
    pub leg_len: f64,
    pub coarse_h: f64,
    pub fine_h: f64,
    /// Half width of the refinement square centred at the re-entrant corner.
    pub corner_band: f64,
}

impl LShapeMeshSpec {
    pub fn new(leg_len: f64, coarse_h: f64, fine_h: f64) -> Self {
        Self {
            leg_len,
            coarse_h,
            fine_h,
            corner_band: 0.128 * leg_len,
        }
    }
}

#[derive(Debug, Clone)]
pub struct Mesh {
    nodes: Vec<[f64; 2]>,
    elements: Vec<[usize; 4]>,
    boundary_sets: BTreeMap<String, Vec<usize>>,
    notch_faces: Vec<NotchFace>,
}

impl Mesh {
    /// Validating constructor. Elements must be counter-clockwise with
    /// positive Jacobian at every 2x2 Gauss point.
    pub fn new(
        nodes: Vec<[f64; 2]>,
        elements: Vec<[usize; 4]>,
        boundary_sets: BTreeMap<String, Vec<usize>>,
        notch_faces: Vec<NotchFace>,
    ) -> Result<Self> {
        let n = nodes.len();
        for (e, conn) in elements.iter().enumerate() {
            for (a, &i) in conn.iter().enumerate() {
                if i >= n {
                    return Err(Error::Config(format!("element {e} references node {i} of {n}")));
                }
                if conn[..a].contains(&i) {
                    return Err(Error::Config(format!("element {e} repeats node {i}")));
                }
            }
        }
        for (name, set) in &boundary_sets {
            if let Some(&bad) = set.iter().find(|&&i| i >= n) {
                return Err(Error::Config(format!("boundary set {name} references node {bad}")));
            }
        }
        let mesh = Self {
            nodes,
            elements,
            boundary_sets,
            notch_faces,
        };
        let (gp, _) = gauss_legendre(2);
        for e in 0..mesh.elements.len() {
            let xe = mesh.element_coords(e);
            for &xi in &gp {
                for &eta in &gp {
                    let det = jacobian_det(&xe, xi, eta);
                    if det <= 0.0 {
                        return Err(Error::Config(format!(
                            "element {e} has non-positive jacobian {det:e}"
                        )));
                    }
                }
            }
        }
        Ok(mesh)
    }

    pub fn nodes(&self) -> &[[f64; 2]] {
        &self.nodes
    }

    pub fn elements(&self) -> &[[usize; 4]] {
        &self.elements
    }

    pub fn num_nodes(&self) -> usize {
        self.nodes.len()
    }

    pub fn num_elements(&self) -> usize {
        self.elements.len()
    }

    pub fn notch_faces(&self) -> &[NotchFace] {
        &self.notch_faces
    }

    pub fn boundary_sets(&self) -> &BTreeMap<String, Vec<usize>> {
        &self.boundary_sets
    }

    /// Nodes of a named boundary set (empty slice when absent).
    pub fn boundary_set(&self, name: &str) -> &[usize] {
        self.boundary_sets.get(name).map(Vec::as_slice).unwrap_or(&[])
    }

    pub fn set_boundary_set(&mut self, name: &str, nodes: Vec<usize>) {
        self.boundary_sets.insert(name.to_string(), nodes);
    }

    pub fn element_coords(&self, e: usize) -> [[f64; 2]; 4] {
        let c = self.elements[e];
        [self.nodes[c[0]], self.nodes[c[1]], self.nodes[c[2]], self.nodes[c[3]]]
    }

    /// Area of one element by 2x2 Gauss integration of the Jacobian (exact
    /// for bilinear geometry).
    pub fn element_area(&self, e: usize) -> f64 {
        let xe = self.element_coords(e);
        let (gp, gw) = gauss_legendre(2);
        let mut area = 0.0;
        for (i, &xi) in gp.iter().enumerate() {
            for (j, &eta) in gp.iter().enumerate() {
                area += gw[i] * gw[j] * jacobian_det(&xe, xi, eta);
            }
        }
        area
    }

    pub fn area(&self) -> f64 {
        (0..self.elements.len()).map(|e| self.element_area(e)).sum()
    }

    /// Shortest and longest element edge.
    pub fn edge_length_range(&self) -> (f64, f64) {
        let mut lo = f64::INFINITY;
        let mut hi = 0.0f64;
        for e in 0..self.elements.len() {
            let xe = self.element_coords(e);
            for a in 0..4 {
                let p = xe[a];
                let q = xe[(a + 1) % 4];
                let l = ((q[0] - p[0]).powi(2) + (q[1] - p[1]).powi(2)).sqrt();
                lo = lo.min(l);
                hi = hi.max(l);
            }
        }
        (lo, hi)
    }

    /// Node indices whose coordinates satisfy `pred`.
    pub fn select_nodes(&self, pred: impl Fn([f64; 2]) -> bool) -> Vec<usize> {
        self.nodes
            .iter()
            .enumerate()
            .filter(|(_, &x)| pred(x))
            .map(|(i, _)| i)
            .collect()
    }
}

fn jacobian_det(xe: &[[f64; 2]; 4], xi: f64, eta: f64) -> f64 {
    let dn = q1_derivatives(xi, eta);
    let mut j = [[0.0; 2]; 2];
    for a in 0..4 {
        for r in 0..2 {
            j[r][0] += xe[a][r] * dn[a][0];
            j[r][1] += xe[a][r] * dn[a][1];
        }
    }
    j[0][0] * j[1][1] - j[0][1] * j[1][0]
}

/// Per-node lumped weights `w_i = ∫ N_i dx` (row sums of the consistent
/// mass matrix). They sum to the mesh area.
pub fn norm_quadrature_weights(mesh: &Mesh) -> Vec<f64> {
    let mut w = vec![0.0; mesh.num_nodes()];
    let (gp, gw) = gauss_legendre(2);
    for (e, conn) in mesh.elements().iter().enumerate() {
        let xe = mesh.element_coords(e);
        for (i, &xi) in gp.iter().enumerate() {
            for (j, &eta) in gp.iter().enumerate() {
                let n = q1_shape(xi, eta);
                let wdet = gw[i] * gw[j] * jacobian_det(&xe, xi, eta);
                for a in 0..4 {
                    w[conn[a]] += n[a] * wdet;
                }
            }
        }
    }
    w
}

fn uniform_cells(len: f64, h: f64) -> Vec<f64> {
    let n = ((len / h) - 1e-9).ceil().max(1.0) as usize;
    vec![len / n as f64; n]
}

/// Cells of a segment of length `len` starting next to a fine region:
/// sizes 2·fine, 4·fine, … below `coarse`, then uniform cells of size at
/// most `coarse` filling the remainder.
fn graded_cells(len: f64, fine: f64, coarse: f64) -> Vec<f64> {
    let mut transition = Vec::new();
    let mut h = 2.0 * fine;
    while h < coarse * (1.0 - 1e-9) {
        transition.push(h);
        h *= 2.0;
    }
    loop {
        let used: f64 = transition.iter().sum();
        if used > len - GEOM_EPS && !transition.is_empty() {
            transition.pop();
            continue;
        }
        let rest = len - used;
        let last = transition.last().copied().unwrap_or(0.0);
        if rest <= GEOM_EPS {
            return transition;
        }
        let m = ((rest / coarse) - 1e-9).ceil().max(1.0);
        let size = rest / m;
        if size < 0.5 * last && !transition.is_empty() {
            // remainder too thin to follow the last transition cell; merge
            transition.pop();
            continue;
        }
        transition.extend(std::iter::repeat(size).take(m as usize));
        return transition;
    }
}

/// Coordinates of a graded axis on `[0, len]`.
///
/// `band` is the fine region (ignored when `fine >= coarse`); `pins` are
/// coordinates that must be grid lines.
pub fn graded_axis(len: f64, coarse: f64, fine: f64, band: (f64, f64), pins: &[f64]) -> Result<Vec<f64>> {
    if !(len > 0.0) {
        return Err(Error::Config(format!("axis length {len} must be positive")));
    }
    if !(fine > 0.0) || !(coarse > 0.0) {
        return Err(Error::Config("element sizes must be positive".into()));
    }
    if fine > coarse * (1.0 + 1e-12) {
        return Err(Error::Config(format!("fine_h {fine} exceeds coarse_h {coarse}")));
    }
    let refine = fine < coarse * (1.0 - 1e-12);
    let (lo, hi) = band;
    if refine {
        if !(hi > lo) {
            return Err(Error::Config(format!("degenerate refinement band ({lo}, {hi})")));
        }
        if lo < -GEOM_EPS || hi > len + GEOM_EPS {
            return Err(Error::Config(format!("refinement band ({lo}, {hi}) outside [0, {len}]")));
        }
    }
    let mut breaks: Vec<f64> = vec![0.0, len];
    if refine {
        breaks.push(lo.max(0.0));
        breaks.push(hi.min(len));
    }
    for &p in pins {
        if p < -GEOM_EPS || p > len + GEOM_EPS {
            return Err(Error::Config(format!("pinned coordinate {p} outside [0, {len}]")));
        }
        breaks.push(p);
    }
    breaks.sort_by(|a, b| a.total_cmp(b));
    breaks.dedup_by(|a, b| (*a - *b).abs() < GEOM_EPS);

    let mut coords = vec![0.0];
    for seg in breaks.windows(2) {
        let (a, b) = (seg[0], seg[1]);
        let l = b - a;
        let cells = if !refine {
            uniform_cells(l, coarse)
        } else if a >= lo - GEOM_EPS && b <= hi + GEOM_EPS {
            uniform_cells(l, fine)
        } else if (b - lo).abs() < GEOM_EPS {
            let mut c = graded_cells(l, fine, coarse);
            c.reverse();
            c
        } else if (a - hi).abs() < GEOM_EPS {
            graded_cells(l, fine, coarse)
        } else {
            uniform_cells(l, coarse)
        };
        let mut x = a;
        for (i, h) in cells.iter().enumerate() {
            x = if i + 1 == cells.len() { b } else { x + h };
            coords.push(x);
        }
    }
    Ok(coords)
}

/// Tensor-product grid; node (i, j) has index `j * xs.len() + i`.
fn tensor_grid(xs: &[f64], ys: &[f64]) -> (Vec<[f64; 2]>, Vec<[usize; 4]>) {
    let nx = xs.len();
    let mut nodes = Vec::with_capacity(nx * ys.len());
    for &y in ys {
        for &x in xs {
            nodes.push([x, y]);
        }
    }
    let mut elements = Vec::with_capacity((nx - 1) * (ys.len() - 1));
    for j in 0..ys.len() - 1 {
        for i in 0..nx - 1 {
            let n0 = j * nx + i;
            elements.push([n0, n0 + 1, n0 + 1 + nx, n0 + nx]);
        }
    }
    (nodes, elements)
}

fn find_line(coords: &[f64], v: f64) -> Result<usize> {
    coords
        .iter()
        .position(|&c| (c - v).abs() < 1e-9)
        .ok_or_else(|| Error::Config(format!("coordinate {v} is not a grid line")))
}

/// Uniform `nx × ny` grid of a `width × height` rectangle, with the
/// boundary sets "left", "right", "bottom" and "top".
pub fn rectangle(width: f64, height: f64, nx: usize, ny: usize) -> Result<Mesh> {
    if nx == 0 || ny == 0 {
        return Err(Error::Config("rectangle needs at least one cell per direction".into()));
    }
    let xs: Vec<f64> = (0..=nx).map(|i| width * i as f64 / nx as f64).collect();
    let ys: Vec<f64> = (0..=ny).map(|j| height * j as f64 / ny as f64).collect();
    let (nodes, elements) = tensor_grid(&xs, &ys);
    let mut mesh = Mesh::new(nodes, elements, BTreeMap::new(), Vec::new())?;
    let tol = 1e-9 * width.max(height);
    mesh.set_boundary_set("left", mesh.select_nodes(|p| p[0].abs() < tol));
    mesh.set_boundary_set("right", mesh.select_nodes(|p| (p[0] - width).abs() < tol));
    mesh.set_boundary_set("bottom", mesh.select_nodes(|p| p[1].abs() < tol));
    mesh.set_boundary_set("top", mesh.select_nodes(|p| (p[1] - height).abs() < tol));
    Ok(mesh)
}

/// Compact-tension specimen: square plate, horizontal notch at mid height
/// from the left edge to `notch_tip`. Besides "left", "right", "bottom" and
/// "top", the sets "clamped" and "loaded" name the edges selected by
/// `spec.loading`.
pub fn build_ct_mesh(spec: &CtMeshSpec) -> Result<Mesh> {
    let s = spec.side_len;
    let mid = 0.5 * s;
    let has_notch = spec.notch == NotchKind::Slit;
    if has_notch && !(spec.notch_tip > 0.0 && spec.notch_tip < s) {
        return Err(Error::Config(format!("notch tip {} outside (0, {s})", spec.notch_tip)));
    }
    let x_pins: Vec<f64> = if spec.notch == NotchKind::None { vec![] } else { vec![spec.notch_tip] };
    let y_pins = [mid];
    let xs = graded_axis(s, spec.coarse_h, spec.fine_h, spec.refine_band.x, &x_pins)?;
    let ys = graded_axis(s, spec.coarse_h, spec.fine_h, spec.refine_band.y, &y_pins)?;
    let (mut nodes, mut elements) = tensor_grid(&xs, &ys);
    let nx = xs.len();
    let mut notch_faces = Vec::new();

    if has_notch {
        let jm = find_line(&ys, mid)?;
        let itip = find_line(&xs, spec.notch_tip)?;
        // duplicate the slit nodes left of the tip; the upper row of
        // elements is rewired to the copies
        let mut dup = vec![usize::MAX; itip + 1];
        for (i, d) in dup.iter_mut().enumerate().take(itip) {
            *d = nodes.len();
            nodes.push(nodes[jm * nx + i]);
        }
        dup[itip] = jm * nx + itip;
        for i in 0..itip {
            let e = jm * (nx - 1) + i;
            let conn = &mut elements[e];
            for n in conn.iter_mut() {
                let node = *n;
                if node / nx == jm && node % nx < itip {
                    *n = dup[node % nx];
                }
            }
            notch_faces.push(NotchFace {
                lower: [jm * nx + i, jm * nx + i + 1],
                upper: [dup[i], dup[i + 1]],
            });
        }
    }

    let mut mesh = Mesh::new(nodes, elements, BTreeMap::new(), notch_faces)?;
    let tol = 1e-9 * s;
    let left = mesh.select_nodes(|p| p[0].abs() < tol);
    let right = mesh.select_nodes(|p| (p[0] - s).abs() < tol);
    let bottom = mesh.select_nodes(|p| p[1].abs() < tol);
    let top = mesh.select_nodes(|p| (p[1] - s).abs() < tol);
    let (clamped, loaded) = match spec.loading {
        CtLoading::Opening => (bottom.clone(), top.clone()),
        CtLoading::Stretch => (left.clone(), right.clone()),
    };
    mesh.set_boundary_set("left", left);
    mesh.set_boundary_set("right", right);
    mesh.set_boundary_set("bottom", bottom);
    mesh.set_boundary_set("top", top);
    mesh.set_boundary_set("clamped", clamped);
    mesh.set_boundary_set("loaded", loaded);
    Ok(mesh)
}

/// Initial damage field seeding the notch on a slit-free mesh: z = 0 on the
/// notch line and within one fine cell of it, 1 elsewhere.
pub fn notch_initial_damage(mesh: &Mesh, spec: &CtMeshSpec) -> Vec<f64> {
    let mid = 0.5 * spec.side_len;
    let width = 0.5 * spec.fine_h + 1e-12;
    mesh.nodes()
        .iter()
        .map(|p| {
            if p[0] <= spec.notch_tip + 1e-12 && (p[1] - mid).abs() <= width {
                0.0
            } else {
                1.0
            }
        })
        .collect()
}

/// L-shaped plate: the `2L × 2L` square minus its upper-right `L × L`
/// quadrant. "clamped" is the bottom edge of the vertical leg
/// (y = 0, x ≤ L); "loaded" are the bottom-face nodes of the horizontal leg
/// within one coarse cell of its free end.
pub fn build_lshape_mesh(spec: &LShapeMeshSpec) -> Result<Mesh> {
    let leg = spec.leg_len;
    let full = 2.0 * leg;
    let band = (leg - spec.corner_band, leg + spec.corner_band);
    let xs = graded_axis(full, spec.coarse_h, spec.fine_h, band, &[leg])?;
    let ys = graded_axis(full, spec.coarse_h, spec.fine_h, band, &[leg])?;
    let (nodes, elements) = tensor_grid(&xs, &ys);

    let tol = 1e-9 * full;
    let kept: Vec<[usize; 4]> = elements
        .into_iter()
        .filter(|conn| {
            let cx = conn.iter().map(|&n| nodes[n][0]).sum::<f64>() / 4.0;
            let cy = conn.iter().map(|&n| nodes[n][1]).sum::<f64>() / 4.0;
            !(cx > leg && cy > leg)
        })
        .collect();
    let mut remap = vec![usize::MAX; nodes.len()];
    let mut new_nodes = Vec::new();
    for conn in &kept {
        for &n in conn {
            if remap[n] == usize::MAX {
                remap[n] = usize::MAX - 1;
            }
        }
    }
    for (i, r) in remap.iter_mut().enumerate() {
        if *r != usize::MAX {
            *r = new_nodes.len();
            new_nodes.push(nodes[i]);
        }
    }
    let new_elements: Vec<[usize; 4]> = kept.iter().map(|c| c.map(|n| remap[n])).collect();
    let mut mesh = Mesh::new(new_nodes, new_elements, BTreeMap::new(), Vec::new())?;
    mesh.set_boundary_set("clamped", mesh.select_nodes(|p| p[1].abs() < tol && p[0] <= leg + tol));
    let reach = spec.coarse_h;
    mesh.set_boundary_set(
        "loaded",
        mesh.select_nodes(|p| p[1].abs() < tol && p[0] >= full - reach - tol),
    );
    Ok(mesh)
}
