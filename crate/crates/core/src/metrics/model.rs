use std::f64::consts::TAU;

use nalgebra::Vector3;
use serde::{Deserialize, Serialize};

use super::MetricsError;
use crate::codec::KEYPOINTS;
use crate::geometry::WorldPoint;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Symmetry {
    Asymmetric,
    /// Rotationally symmetric about `axis` (object frame, through the origin).
    ContinuousAxis { axis: [f64; 3] },
}

impl Symmetry {
    pub fn is_symmetric(&self) -> bool {
        !matches!(self, Symmetry::Asymmetric)
    }
}

/// Rigid instrument: vertex set, bounding-box keypoints and diameter.
#[derive(Debug, Clone, PartialEq)]
pub struct InstrumentModel {
    pub name: String,
    pub vertices: Vec<WorldPoint>,
    /// Bounding-box centre followed by its eight corners.
    pub control_points: [WorldPoint; KEYPOINTS],
    /// Object diameter `d` used for relative thresholds, mm.
    pub diameter_mm: f64,
    pub symmetry: Symmetry,
}

/// File form of an instrument: JSON with optional explicit diameter.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct InstrumentSpec {
    pub name: String,
    #[serde(default)]
    pub diameter_mm: Option<f64>,
    pub symmetry: Symmetry,
    pub vertices: Vec<[f64; 3]>,
}

impl InstrumentModel {
    /// `diameter_mm` defaults to the largest vertex-pair distance.
    pub fn new(
        name: &str,
        vertices: Vec<WorldPoint>,
        diameter_mm: Option<f64>,
        symmetry: Symmetry,
    ) -> Result<Self, MetricsError> {
        if vertices.is_empty() {
            return Err(MetricsError::EmptyModel);
        }
        if vertices.len() < 4 {
            return Err(MetricsError::InvalidModel(format!(
                "need at least 4 vertices, got {}",
                vertices.len()
            )));
        }
        if vertices.iter().any(|v| !v.iter().all(|c| c.is_finite())) {
            return Err(MetricsError::InvalidModel("non-finite vertex".into()));
        }
        if let Symmetry::ContinuousAxis { axis } = symmetry {
            if !(Vector3::from(axis).norm() > 0.0) {
                return Err(MetricsError::InvalidModel("symmetry axis is zero".into()));
            }
        }
        let diameter_mm = diameter_mm.unwrap_or_else(|| max_pair_distance(&vertices));
        if !(diameter_mm > 0.0 && diameter_mm.is_finite()) {
            return Err(MetricsError::InvalidModel(format!("diameter {diameter_mm}")));
        }
        Ok(Self {
            name: name.to_owned(),
            control_points: bounding_box_keypoints(&vertices),
            vertices,
            diameter_mm,
            symmetry,
        })
    }

    pub fn from_spec(spec: &InstrumentSpec) -> Result<Self, MetricsError> {
        Self::new(
            &spec.name,
            spec.vertices.iter().map(|v| WorldPoint::new(v[0], v[1], v[2])).collect(),
            spec.diameter_mm,
            spec.symmetry,
        )
    }

    pub fn to_spec(&self) -> InstrumentSpec {
        InstrumentSpec {
            name: self.name.clone(),
            diameter_mm: Some(self.diameter_mm),
            symmetry: self.symmetry,
            vertices: self.vertices.iter().map(|v| [v.x, v.y, v.z]).collect(),
        }
    }

    /// Axis-aligned cube of edge `edge_mm` centred at the origin, sampled on
    /// a `per_edge × per_edge` grid on every face. Its diameter is the edge
    /// length, the convention used for reporting cube accuracies.
    pub fn cube(edge_mm: f64, per_edge: usize) -> Result<Self, MetricsError> {
        let n = per_edge.max(2);
        let h = edge_mm / 2.0;
        let steps: Vec<f64> = (0..n).map(|k| -h + edge_mm * k as f64 / (n - 1) as f64).collect();
        let mut vertices = Vec::new();
        for &a in &steps {
            for &b in &steps {
                for &c in &[-h, h] {
                    vertices.push(WorldPoint::new(c, a, b));
                    vertices.push(WorldPoint::new(a, c, b));
                    vertices.push(WorldPoint::new(a, b, c));
                }
            }
        }
        dedup(&mut vertices);
        Self::new("cube", vertices, Some(edge_mm), Symmetry::Asymmetric)
    }

    /// Screw along `+z` (head up), centred on its bounding box: a shaft
    /// cylinder with a bottom cap and a wider head disk. The diameter is the
    /// overall length.
    pub fn screw(
        length_mm: f64,
        head_diameter_mm: f64,
        shaft_diameter_mm: f64,
        head_height_mm: f64,
        ring_samples: usize,
        levels: usize,
    ) -> Result<Self, MetricsError> {
        if !(length_mm > head_height_mm && head_height_mm > 0.0) {
            return Err(MetricsError::InvalidModel("screw head taller than screw".into()));
        }
        let ring_samples = ring_samples.max(3);
        let levels = levels.max(2);
        let bottom = -length_mm / 2.0;
        let top = length_mm / 2.0;
        let head_start = top - head_height_mm;
        let ring = |radius: f64, z: f64, out: &mut Vec<WorldPoint>| {
            for k in 0..ring_samples {
                let t = TAU * k as f64 / ring_samples as f64;
                out.push(WorldPoint::new(radius * t.cos(), radius * t.sin(), z));
            }
        };
        let (r_shaft, r_head) = (shaft_diameter_mm / 2.0, head_diameter_mm / 2.0);
        let mut vertices = Vec::new();
        for l in 0..levels {
            let z = bottom + (head_start - bottom) * l as f64 / (levels - 1) as f64;
            ring(r_shaft, z, &mut vertices);
        }
        // bottom cap, head underside, head rim and top disk
        vertices.push(WorldPoint::new(0.0, 0.0, bottom));
        ring(r_shaft / 2.0, bottom, &mut vertices);
        for r in [r_head, r_head * 2.0 / 3.0, r_head / 3.0] {
            ring(r, head_start, &mut vertices);
            ring(r, top, &mut vertices);
        }
        ring(r_head, (head_start + top) / 2.0, &mut vertices);
        vertices.push(WorldPoint::new(0.0, 0.0, top));
        Self::new(
            "screw",
            vertices,
            Some(length_mm),
            Symmetry::ContinuousAxis { axis: [0.0, 0.0, 1.0] },
        )
    }

    /// The 30 mm cube.
    pub fn default_cube() -> Self {
        Self::cube(30.0, 7).expect("valid cube")
    }

    /// 3.5 mm cannulated screw, 34.3 mm long with a 6.88 mm head.
    pub fn default_screw() -> Self {
        Self::screw(34.3, 6.88, 3.5, 2.5, 24, 12).expect("valid screw")
    }

    pub fn builtin(name: &str) -> Option<Self> {
        match name {
            "cube" => Some(Self::default_cube()),
            "screw" => Some(Self::default_screw()),
            _ => None,
        }
    }

    pub fn max_vertex_distance(&self) -> f64 {
        max_pair_distance(&self.vertices)
    }

    pub fn symmetry_axis(&self) -> Option<Vector3<f64>> {
        match self.symmetry {
            Symmetry::Asymmetric => None,
            Symmetry::ContinuousAxis { axis } => Some(Vector3::from(axis).normalize()),
        }
    }
}

fn max_pair_distance(vertices: &[WorldPoint]) -> f64 {
    let mut best = 0.0_f64;
    for (k, a) in vertices.iter().enumerate() {
        for b in &vertices[k + 1..] {
            best = best.max((a - b).norm());
        }
    }
    best
}

fn bounding_box_keypoints(vertices: &[WorldPoint]) -> [WorldPoint; KEYPOINTS] {
    let (lo, hi) = vertices.iter().fold(
        (Vector3::repeat(f64::INFINITY), Vector3::repeat(f64::NEG_INFINITY)),
        |(lo, hi), v| (lo.inf(&v.coords), hi.sup(&v.coords)),
    );
    let mut pts = [WorldPoint::from((lo + hi) / 2.0); KEYPOINTS];
    for (k, p) in pts[1..].iter_mut().enumerate() {
        let pick = |bit: usize, axis: usize| if k & bit == 0 { lo[axis] } else { hi[axis] };
        *p = WorldPoint::new(pick(4, 0), pick(2, 1), pick(1, 2));
    }
    pts
}

fn dedup(vertices: &mut Vec<WorldPoint>) {
    vertices.sort_by(|a, b| {
        a.x.total_cmp(&b.x)
            .then(a.y.total_cmp(&b.y))
            .then(a.z.total_cmp(&b.z))
    });
    vertices.dedup();
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn cube_model() {
        let cube = InstrumentModel::default_cube();
        assert_eq!(cube.diameter_mm, 30.0);
        // 6 faces of 7x7 minus shared edges and corners
        assert_eq!(cube.vertices.len(), 7 * 7 * 7 - 5 * 5 * 5);
        assert_eq!(cube.control_points[0], WorldPoint::origin());
        assert_eq!(cube.control_points[1], WorldPoint::new(-15.0, -15.0, -15.0));
        assert_eq!(cube.control_points[8], WorldPoint::new(15.0, 15.0, 15.0));
        assert!((cube.max_vertex_distance() - 30.0 * 3f64.sqrt()).abs() < 1e-12);
    }

    #[test]
    fn screw_model() {
        let screw = InstrumentModel::default_screw();
        assert_eq!(screw.diameter_mm, 34.3);
        assert!((0.1 * screw.diameter_mm - 3.43).abs() < 1e-12);
        let top = screw.control_points[8];
        assert!((top.z - 17.15).abs() < 1e-12);
        assert!((top.x - 3.44).abs() < 1e-12);
        assert!(screw.symmetry.is_symmetric());
        assert_eq!(screw.symmetry_axis(), Some(Vector3::z()));
    }

    #[test]
    fn control_points_bound_vertices() {
        for m in [InstrumentModel::default_cube(), InstrumentModel::default_screw()] {
            let (lo, hi) = (m.control_points[1], m.control_points[8]);
            for v in &m.vertices {
                assert!((0..3).all(|a| v[a] >= lo[a] && v[a] <= hi[a]));
            }
        }
    }

    #[test]
    fn computed_diameter_and_validation() {
        let pts = vec![
            WorldPoint::origin(),
            WorldPoint::new(3.0, 0.0, 0.0),
            WorldPoint::new(0.0, 4.0, 0.0),
            WorldPoint::new(0.0, 0.0, 1.0),
        ];
        let m = InstrumentModel::new("tri", pts.clone(), None, Symmetry::Asymmetric).unwrap();
        assert_eq!(m.diameter_mm, 5.0);
        assert_eq!(
            InstrumentModel::new("e", vec![], None, Symmetry::Asymmetric),
            Err(MetricsError::EmptyModel)
        );
        assert!(InstrumentModel::new("few", pts[..3].to_vec(), None, Symmetry::Asymmetric).is_err());
        assert!(InstrumentModel::new(
            "axis",
            pts,
            None,
            Symmetry::ContinuousAxis { axis: [0.0; 3] }
        )
        .is_err());
    }

    #[test]
    fn spec_round_trip() {
        let screw = InstrumentModel::default_screw();
        let json = serde_json::to_string(&screw.to_spec()).unwrap();
        let back: InstrumentSpec = serde_json::from_str(&json).unwrap();
        assert_eq!(InstrumentModel::from_spec(&back).unwrap(), screw);
    }
}
