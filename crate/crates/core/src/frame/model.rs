use nalgebra::DMatrix;
use serde::{Deserialize, Serialize};

use super::{FrameConfig, JointSpringSet};
use crate::error::{Error, Result};

const DOF_PER_NODE: usize = 3;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Direction {
    X = 0,
    Y = 1,
    Rot = 2,
}

/// Planar Euler-Bernoulli beam-column element between two nodes.
#[derive(Debug, Clone, PartialEq)]
pub struct BeamElement {
    pub nodes: [usize; 2],
    pub elastic_modulus: f64,
    pub density: f64,
    pub area: f64,
    pub inertia: f64,
}

/// Zero-length connection between two coincident nodes: one spring and one
/// dashpot per direction (x, y, rotation).
#[derive(Debug, Clone, PartialEq)]
pub struct JointLink {
    pub nodes: [usize; 2],
    pub stiffness: [f64; 3],
    pub dashpot: [f64; 3],
}

/// General planar frame: nodes, beam elements, joint links and fully fixed
/// supports.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct FrameModel {
    pub nodes: Vec<[f64; 2]>,
    pub elements: Vec<BeamElement>,
    pub links: Vec<JointLink>,
    pub fixed_nodes: Vec<usize>,
    pub rayleigh_alpha: f64,
    pub rayleigh_beta: f64,
}

/// Assembled mass, damping and stiffness over the free DOFs.
#[derive(Debug, Clone)]
pub struct SystemMatrices {
    pub mass: DMatrix<f64>,
    pub damping: DMatrix<f64>,
    pub stiffness: DMatrix<f64>,
    /// Per node: equation index of the x, y and rotation DOF (None if fixed).
    pub dof_map: Vec<[Option<usize>; 3]>,
    pub n: usize,
    /// Vertical DOF of the accelerometer node, for portal frames.
    pub sensor_dof: Option<usize>,
    /// Vertical DOF of the hammer node, for portal frames.
    pub hammer_dof: Option<usize>,
}

impl SystemMatrices {
    /// Wraps raw matrices, e.g. for single-DOF checks.
    pub fn from_matrices(mass: DMatrix<f64>, damping: DMatrix<f64>, stiffness: DMatrix<f64>) -> Result<Self> {
        let n = mass.nrows();
        for (name, m) in [("mass", &mass), ("damping", &damping), ("stiffness", &stiffness)] {
            if m.nrows() != n || m.ncols() != n {
                return Err(Error::Shape(format!("{name} matrix must be {n}x{n}")));
            }
        }
        let sys = Self { mass, damping, stiffness, dof_map: Vec::new(), n, sensor_dof: None, hammer_dof: None };
        sys.check_definite()?;
        Ok(sys)
    }

    pub fn dof(&self, node: usize, dir: Direction) -> Option<usize> {
        self.dof_map.get(node).and_then(|d| d[dir as usize])
    }

    fn check_definite(&self) -> Result<()> {
        if self.n == 0 {
            return Err(Error::ModelDefinition("model has no free degrees of freedom".into()));
        }
        if !well_conditioned_spd(&self.stiffness) {
            return Err(Error::ModelDefinition(
                "stiffness matrix is singular or indefinite after boundary conditions".into(),
            ));
        }
        if !well_conditioned_spd(&self.mass) {
            return Err(Error::ModelDefinition("mass matrix is not positive definite".into()));
        }
        Ok(())
    }
}

/// Cholesky succeeds and no pivot collapses to rounding level, which is how
/// an unrestrained rigid-body mode shows up numerically.
fn well_conditioned_spd(m: &DMatrix<f64>) -> bool {
    let Some(chol) = m.clone().cholesky() else { return false };
    let l = chol.l();
    let max_diag = m.diagonal().amax();
    (0..m.nrows()).all(|i| l[(i, i)] * l[(i, i)] > 1e-12 * max_diag)
}

/// Global-coordinate stiffness of a planar beam element with nodal DOFs
/// `(u1, v1, θ1, u2, v2, θ2)`, for an element of `length` whose axis has
/// direction cosines `(c, s)`.
pub fn beam_element_stiffness(e: f64, a: f64, i: f64, length: f64, c: f64, s: f64) -> [[f64; 6]; 6] {
    let l = length;
    let ea = e * a / l;
    let k1 = 12.0 * e * i / l.powi(3);
    let k2 = 6.0 * e * i / l.powi(2);
    let k3 = 4.0 * e * i / l;
    let k4 = 2.0 * e * i / l;
    let local = [
        [ea, 0.0, 0.0, -ea, 0.0, 0.0],
        [0.0, k1, k2, 0.0, -k1, k2],
        [0.0, k2, k3, 0.0, -k2, k4],
        [-ea, 0.0, 0.0, ea, 0.0, 0.0],
        [0.0, -k1, -k2, 0.0, k1, -k2],
        [0.0, k2, k4, 0.0, -k2, k3],
    ];
    rotate(&local, c, s)
}

/// Consistent mass matrix of a planar beam element, global coordinates.
pub fn beam_element_mass(density: f64, a: f64, length: f64, c: f64, s: f64) -> [[f64; 6]; 6] {
    let l = length;
    let m = density * a * l;
    let ax = m / 6.0;
    let b = m / 420.0;
    let local = [
        [2.0 * ax, 0.0, 0.0, ax, 0.0, 0.0],
        [0.0, 156.0 * b, 22.0 * l * b, 0.0, 54.0 * b, -13.0 * l * b],
        [0.0, 22.0 * l * b, 4.0 * l * l * b, 0.0, 13.0 * l * b, -3.0 * l * l * b],
        [ax, 0.0, 0.0, 2.0 * ax, 0.0, 0.0],
        [0.0, 54.0 * b, 13.0 * l * b, 0.0, 156.0 * b, -22.0 * l * b],
        [0.0, -13.0 * l * b, -3.0 * l * l * b, 0.0, -22.0 * l * b, 4.0 * l * l * b],
    ];
    rotate(&local, c, s)
}

/// Tᵀ·A·T with T the block-diagonal nodal rotation.
fn rotate(local: &[[f64; 6]; 6], c: f64, s: f64) -> [[f64; 6]; 6] {
    let mut t = [[0.0; 6]; 6];
    for blk in [0, 3] {
        t[blk][blk] = c;
        t[blk][blk + 1] = s;
        t[blk + 1][blk] = -s;
        t[blk + 1][blk + 1] = c;
        t[blk + 2][blk + 2] = 1.0;
    }
    let mut at = [[0.0; 6]; 6];
    for i in 0..6 {
        for j in 0..6 {
            at[i][j] = (0..6).map(|k| local[i][k] * t[k][j]).sum();
        }
    }
    let mut out = [[0.0; 6]; 6];
    for i in 0..6 {
        for j in 0..6 {
            out[i][j] = (0..6).map(|k| t[k][i] * at[k][j]).sum();
        }
    }
    // Symmetrize away rounding from the two products.
    for i in 0..6 {
        for j in 0..i {
            let v = 0.5 * (out[i][j] + out[j][i]);
            out[i][j] = v;
            out[j][i] = v;
        }
    }
    out
}

impl FrameModel {
    pub fn dof_map(&self) -> Vec<[Option<usize>; 3]> {
        let mut next = 0;
        (0..self.nodes.len())
            .map(|node| {
                if self.fixed_nodes.contains(&node) {
                    [None; 3]
                } else {
                    let d = [Some(next), Some(next + 1), Some(next + 2)];
                    next += DOF_PER_NODE;
                    d
                }
            })
            .collect()
    }

    pub fn assemble(&self) -> Result<SystemMatrices> {
        let dof_map = self.dof_map();
        let n = dof_map.iter().flatten().filter(|d| d.is_some()).count();
        let mut mass = DMatrix::zeros(n, n);
        let mut stiffness = DMatrix::zeros(n, n);
        let mut dashpots = DMatrix::zeros(n, n);

        for (idx, el) in self.elements.iter().enumerate() {
            let [a, b] = el.nodes;
            if a >= self.nodes.len() || b >= self.nodes.len() {
                return Err(Error::ModelDefinition(format!("element {idx} references a missing node")));
            }
            let dx = self.nodes[b][0] - self.nodes[a][0];
            let dy = self.nodes[b][1] - self.nodes[a][1];
            let length = dx.hypot(dy);
            if length <= 0.0 {
                return Err(Error::ModelDefinition(format!("element {idx} has zero length")));
            }
            let (c, s) = (dx / length, dy / length);
            let ke = beam_element_stiffness(el.elastic_modulus, el.area, el.inertia, length, c, s);
            let me = beam_element_mass(el.density, el.area, length, c, s);
            let dofs: Vec<Option<usize>> = dof_map[a].iter().chain(dof_map[b].iter()).copied().collect();
            for (i, di) in dofs.iter().enumerate() {
                let Some(di) = *di else { continue };
                for (j, dj) in dofs.iter().enumerate() {
                    let Some(dj) = *dj else { continue };
                    stiffness[(di, dj)] += ke[i][j];
                    mass[(di, dj)] += me[i][j];
                }
            }
        }

        for link in &self.links {
            let [a, b] = link.nodes;
            for dir in 0..DOF_PER_NODE {
                add_link(&mut stiffness, dof_map[a][dir], dof_map[b][dir], link.stiffness[dir]);
                add_link(&mut dashpots, dof_map[a][dir], dof_map[b][dir], link.dashpot[dir]);
            }
        }

        let damping = &mass * self.rayleigh_alpha + &stiffness * self.rayleigh_beta + dashpots;
        let sys = SystemMatrices { mass, damping, stiffness, dof_map, n, sensor_dof: None, hammer_dof: None };
        sys.check_definite()?;
        Ok(sys)
    }
}

fn add_link(m: &mut DMatrix<f64>, a: Option<usize>, b: Option<usize>, k: f64) {
    if k == 0.0 {
        return;
    }
    if let Some(a) = a {
        m[(a, a)] += k;
    }
    if let Some(b) = b {
        m[(b, b)] += k;
    }
    if let (Some(a), Some(b)) = (a, b) {
        m[(a, b)] -= k;
        m[(b, a)] -= k;
    }
}

/// Node layout of the portal frame.
///
/// Node order: left column base to top, beam left end to right end, right
/// column top to base. The beam ends are separate nodes tied to the column
/// tops through the joint springs. Beam nodes sit on a uniform grid plus the
/// sensor and hammer positions.
#[derive(Debug, Clone)]
pub struct PortalLayout {
    pub model: FrameModel,
    pub sensor_node: usize,
    pub hammer_node: usize,
}

impl PortalLayout {
    pub fn new(cfg: &FrameConfig, springs: &JointSpringSet) -> Result<Self> {
        cfg.validate()?;
        springs.validate()?;
        let epm = cfg.elements_per_member;
        let (l, h) = (cfg.beam_length, cfg.column_height);
        let mut nodes = Vec::new();
        let mut elements = Vec::new();
        let element = |a: usize, b: usize| BeamElement {
            nodes: [a, b],
            elastic_modulus: cfg.elastic_modulus,
            density: cfg.density,
            area: cfg.section_area,
            inertia: cfg.section_inertia,
        };

        for i in 0..=epm {
            nodes.push([0.0, h * i as f64 / epm as f64]);
        }
        let left_top = epm;
        for i in 0..epm {
            elements.push(element(i, i + 1));
        }

        let mut xs: Vec<f64> = (0..=epm).map(|i| l * i as f64 / epm as f64).collect();
        let tol = 1e-9 * l;
        for p in [cfg.sensor_offset, cfg.hammer_offset] {
            if xs.iter().all(|x| (x - p).abs() > tol) {
                xs.push(p);
            }
        }
        xs.sort_by(|a, b| a.total_cmp(b));
        let beam_start = nodes.len();
        for &x in &xs {
            nodes.push([x, h]);
        }
        for i in 0..xs.len() - 1 {
            elements.push(element(beam_start + i, beam_start + i + 1));
        }
        let beam_end = nodes.len() - 1;
        let node_at = |p: f64| beam_start + xs.iter().position(|x| (x - p).abs() <= tol).expect("inserted");
        let sensor_node = node_at(cfg.sensor_offset);
        let hammer_node = node_at(cfg.hammer_offset);

        let right_top = nodes.len();
        for i in 0..=epm {
            nodes.push([l, h * (1.0 - i as f64 / epm as f64)]);
        }
        for i in 0..epm {
            elements.push(element(right_top + i, right_top + i + 1));
        }
        let right_base = nodes.len() - 1;

        let k = springs.to_array();
        let d = cfg.joint_dashpot;
        let links = vec![
            JointLink { nodes: [left_top, beam_start], stiffness: [k[0], k[1], k[2]], dashpot: [d, d, 0.0] },
            JointLink { nodes: [right_top, beam_end], stiffness: [k[3], k[4], k[5]], dashpot: [d, d, 0.0] },
        ];

        Ok(Self {
            model: FrameModel {
                nodes,
                elements,
                links,
                fixed_nodes: vec![0, right_base],
                rayleigh_alpha: cfg.rayleigh_alpha,
                rayleigh_beta: cfg.rayleigh_beta,
            },
            sensor_node,
            hammer_node,
        })
    }

    /// Same frame with the beam ends merged into the column tops, i.e.
    /// perfectly rigid joints.
    pub fn rigid(cfg: &FrameConfig) -> Result<Self> {
        let mut layout = Self::new(cfg, &JointSpringSet::default())?;
        let links = std::mem::take(&mut layout.model.links);
        for link in links {
            let [col, beam] = link.nodes;
            for el in &mut layout.model.elements {
                for n in &mut el.nodes {
                    if *n == beam {
                        *n = col;
                    }
                }
            }
        }
        // Orphaned beam-end nodes are clamped so they carry no DOFs.
        let orphans: Vec<usize> = (0..layout.model.nodes.len())
            .filter(|n| !layout.model.elements.iter().any(|e| e.nodes.contains(n)))
            .collect();
        layout.model.fixed_nodes.extend(orphans);
        Ok(layout)
    }

    pub fn sensor_dof(&self) -> usize {
        self.model.dof_map()[self.sensor_node][Direction::Y as usize].expect("beam nodes are free")
    }

    pub fn hammer_dof(&self) -> usize {
        self.model.dof_map()[self.hammer_node][Direction::Y as usize].expect("beam nodes are free")
    }

    pub fn assemble(&self) -> Result<SystemMatrices> {
        let mut sys = self.model.assemble()?;
        sys.sensor_dof = sys.dof(self.sensor_node, Direction::Y);
        sys.hammer_dof = sys.dof(self.hammer_node, Direction::Y);
        Ok(sys)
    }
}

/// Builds the portal frame with the given joint springs and assembles
/// M, C = αM + βK + dashpots, and K over the free DOFs.
pub fn assemble_frame(cfg: &FrameConfig, springs: &JointSpringSet) -> Result<SystemMatrices> {
    PortalLayout::new(cfg, springs)?.assemble()
}

#[cfg(test)]
mod tests {
    use super::*;

    fn max_asym(m: &DMatrix<f64>) -> f64 {
        let scale = m.amax();
        (m - m.transpose()).amax() / scale
    }

    #[test]
    fn cantilever_matches_textbook_element() {
        let (e, a, i, l) = (2.0e11, 3.0e-4, 6.25e-8, 0.8);
        let model = FrameModel {
            nodes: vec![[0.0, 0.0], [l, 0.0]],
            elements: vec![BeamElement { nodes: [0, 1], elastic_modulus: e, density: 7850.0, area: a, inertia: i }],
            links: vec![],
            fixed_nodes: vec![0],
            rayleigh_alpha: 0.0,
            rayleigh_beta: 0.0,
        };
        let sys = model.assemble().unwrap();
        assert_eq!(sys.n, 3);
        // Hand-written free-end block of the Euler-Bernoulli element.
        let expected = [
            [e * a / l, 0.0, 0.0],
            [0.0, 12.0 * e * i / (l * l * l), -6.0 * e * i / (l * l)],
            [0.0, -6.0 * e * i / (l * l), 4.0 * e * i / l],
        ];
        for r in 0..3 {
            for c in 0..3 {
                let want = expected[r][c];
                let got = sys.stiffness[(r, c)];
                assert!((got - want).abs() <= 1e-12 * want.abs().max(1.0), "({r},{c}) {got} vs {want}");
            }
        }
    }

    #[test]
    fn vertical_element_rotation() {
        // A column element has its axial stiffness in global y.
        let k = beam_element_stiffness(1.0, 2.0, 3.0, 1.0, 0.0, 1.0);
        assert!((k[1][1] - 2.0).abs() < 1e-12);
        assert!((k[0][0] - 36.0).abs() < 1e-12);
    }

    #[test]
    fn portal_matrices_symmetric_and_definite() {
        let sys = assemble_frame(&FrameConfig::default(), &JointSpringSet::default()).unwrap();
        assert!(max_asym(&sys.mass) < 1e-9);
        assert!(max_asym(&sys.stiffness) < 1e-9);
        assert!(max_asym(&sys.damping) < 1e-9);
        assert!(sys.sensor_dof.is_some() && sys.hammer_dof.is_some());
        assert_ne!(sys.sensor_dof, sys.hammer_dof);
    }

    #[test]
    fn unsupported_model_is_rejected() {
        let cfg = FrameConfig::default();
        let mut layout = PortalLayout::new(&cfg, &JointSpringSet::default()).unwrap();
        layout.model.fixed_nodes.clear();
        assert!(matches!(layout.assemble(), Err(Error::ModelDefinition(_))));
    }

    #[test]
    fn sensor_node_position() {
        let cfg = FrameConfig::default();
        let layout = PortalLayout::new(&cfg, &JointSpringSet::default()).unwrap();
        let p = layout.model.nodes[layout.sensor_node];
        assert!((p[0] - 0.262).abs() < 1e-12 && (p[1] - cfg.column_height).abs() < 1e-12);
        let p = layout.model.nodes[layout.hammer_node];
        assert!((p[0] - cfg.hammer_offset).abs() < 1e-12);
    }
}
