use rand::Rng;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use crate::error::{Error, Result};

use super::mesh::Mesh;
use super::sharp::sharp_edges;
use super::vec3::{self, Vec3};

#[derive(Clone, Debug, PartialEq)]
pub struct PointSample {
    pub position: Vec3,
    pub normal: Vec3,
    pub feature: Vec<f64>,
    pub source_face: u32,
}

/// Isotropic map `x -> scale * x + translation` from mesh coordinates to normalized
/// coordinates.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct NormTransform {
    pub scale: f64,
    pub translation: Vec3,
}

impl Default for NormTransform {
    fn default() -> Self {
        NormTransform {
            scale: 1.0,
            translation: [0.0; 3],
        }
    }
}

impl NormTransform {
    pub fn apply(&self, p: Vec3) -> Vec3 {
        vec3::add(vec3::scale(p, self.scale), self.translation)
    }

    pub fn invert(&self, p: Vec3) -> Vec3 {
        vec3::scale(vec3::sub(p, self.translation), 1.0 / self.scale)
    }

    /// `self ∘ inner`: apply `inner` first.
    pub fn compose(&self, inner: &NormTransform) -> NormTransform {
        NormTransform {
            scale: self.scale * inner.scale,
            translation: self.apply(inner.translation),
        }
    }

    /// Transform that centers the tight box of `points` at the origin with its longest
    /// side spanning exactly 1. Degenerate input gets unit scale.
    pub fn fit<'a>(points: impl IntoIterator<Item = &'a Vec3>) -> Option<NormTransform> {
        let (lo, hi) = vec3::bounds(points)?;
        let center = vec3::scale(vec3::add(lo, hi), 0.5);
        let extent = (0..3).map(|k| hi[k] - lo[k]).fold(0.0, f64::max);
        let scale = if extent > 0.0 { 1.0 / extent } else { 1.0 };
        Some(NormTransform {
            scale,
            translation: vec3::scale(center, -scale),
        })
    }
}

#[derive(Clone, Debug, Default, PartialEq)]
pub struct PointCloud {
    pub samples: Vec<PointSample>,
    pub transform: NormTransform,
}

impl PointCloud {
    pub fn len(&self) -> usize {
        self.samples.len()
    }

    pub fn is_empty(&self) -> bool {
        self.samples.is_empty()
    }

    pub fn positions(&self) -> Vec<Vec3> {
        self.samples.iter().map(|s| s.position).collect()
    }

    pub fn feature_dim(&self) -> usize {
        self.samples.first().map_or(0, |s| s.feature.len())
    }
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct SampleParams {
    pub n: usize,
    pub sharp_fraction: f64,
    pub angle_threshold_deg: f64,
    pub seed: u64,
    pub cover_all_faces: bool,
}

impl SampleParams {
    pub fn training(n: usize, seed: u64) -> Self {
        SampleParams {
            n,
            sharp_fraction: 0.5,
            angle_threshold_deg: 30.0,
            seed,
            cover_all_faces: false,
        }
    }
}

fn pick(cdf: &[f64], rng: &mut ChaCha8Rng) -> usize {
    let total = *cdf.last().expect("non-empty cdf");
    let r = rng.gen::<f64>() * total;
    cdf.partition_point(|&c| c <= r).min(cdf.len() - 1)
}

fn cumulative(weights: impl Iterator<Item = f64>) -> Vec<f64> {
    let mut acc = 0.0;
    weights
        .map(|w| {
            acc += w;
            acc
        })
        .collect()
}

fn point_in_triangle(mesh: &Mesh, f: usize, rng: &mut ChaCha8Rng) -> Vec3 {
    let [a, b, c] = mesh.corners(f);
    let (r1, r2): (f64, f64) = (rng.gen(), rng.gen());
    let s = r1.sqrt();
    // (1 - s) a + s (1 - r2) b + s r2 c
    vec3::add(
        vec3::add(vec3::scale(a, 1.0 - s), vec3::scale(b, s * (1.0 - r2))),
        vec3::scale(c, s * r2),
    )
}

/// Sample a point cloud on the mesh surface.
///
/// With `cover_all_faces`, the first `|F|` samples sit at the face centroids. The
/// remaining budget is split into `floor(rest * (1 - sharp_fraction))` area-weighted
/// surface samples followed by length-weighted samples on sharp edges (surface
/// samples when the mesh has no sharp edges). Edge samples carry the normal of one
/// adjacent face chosen by a seeded coin flip.
pub fn sample_point_cloud(mesh: &Mesh, p: &SampleParams) -> Result<PointCloud> {
    if p.n == 0 {
        return Err(Error::invalid("sample count must be positive"));
    }
    if !(0.0..=1.0).contains(&p.sharp_fraction) {
        return Err(Error::invalid(format!("sharp_fraction {} outside [0, 1]", p.sharp_fraction)));
    }
    let nf = mesh.faces.len();
    if nf == 0 {
        return Err(Error::invalid("mesh has no faces"));
    }
    if p.cover_all_faces && p.n < nf {
        return Err(Error::invalid(format!(
            "cover_all_faces needs at least {nf} samples, got {}",
            p.n
        )));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(p.seed);
    let normals: Vec<Vec3> = (0..nf).map(|f| mesh.face_normal(f)).collect();
    let mut samples = Vec::with_capacity(p.n);

    if p.cover_all_faces {
        for f in 0..nf {
            samples.push(PointSample {
                position: mesh.face_centroid(f),
                normal: normals[f],
                feature: Vec::new(),
                source_face: f as u32,
            });
        }
    }
    let rest = p.n - samples.len();
    let n_surface = (rest as f64 * (1.0 - p.sharp_fraction)).floor() as usize;
    let n_edge = rest - n_surface;

    let area_cdf = cumulative((0..nf).map(|f| mesh.face_area(f)));
    let surface = |count: usize, rng: &mut ChaCha8Rng, samples: &mut Vec<PointSample>| {
        for _ in 0..count {
            let f = pick(&area_cdf, rng);
            samples.push(PointSample {
                position: point_in_triangle(mesh, f, rng),
                normal: normals[f],
                feature: Vec::new(),
                source_face: f as u32,
            });
        }
    };
    surface(n_surface, &mut rng, &mut samples);

    let edges = if n_edge > 0 {
        sharp_edges(mesh, p.angle_threshold_deg)
    } else {
        Vec::new()
    };
    if edges.is_empty() {
        surface(n_edge, &mut rng, &mut samples);
    } else {
        let ends: Vec<(Vec3, Vec3)> = edges
            .iter()
            .map(|e| (mesh.vertices[e.edge.0 as usize], mesh.vertices[e.edge.1 as usize]))
            .collect();
        let len_cdf = cumulative(ends.iter().map(|(a, b)| vec3::dist(*a, *b)));
        for _ in 0..n_edge {
            let k = pick(&len_cdf, &mut rng);
            let t: f64 = rng.gen();
            let (a, b) = ends[k];
            let face = if rng.gen::<bool>() {
                edges[k].faces.0
            } else {
                edges[k].faces.1
            };
            samples.push(PointSample {
                position: vec3::lerp(a, b, t),
                normal: normals[face],
                feature: Vec::new(),
                source_face: face as u32,
            });
        }
    }
    Ok(PointCloud {
        samples,
        transform: NormTransform::default(),
    })
}

/// Center and isotropically rescale so the longest bounding-box side spans 1. The
/// applied map is composed into `transform`.
pub fn normalize(cloud: &PointCloud) -> Result<PointCloud> {
    let positions = cloud.positions();
    let t = NormTransform::fit(&positions).ok_or_else(|| Error::invalid("cannot normalize an empty cloud"))?;
    Ok(apply_transform(cloud, &t))
}

/// Apply a further isotropic transform to positions, composing it into the record.
pub fn apply_transform(cloud: &PointCloud, t: &NormTransform) -> PointCloud {
    PointCloud {
        samples: cloud
            .samples
            .iter()
            .map(|s| PointSample {
                position: t.apply(s.position),
                ..s.clone()
            })
            .collect(),
        transform: t.compose(&cloud.transform),
    }
}

/// Map positions back to the original mesh frame.
pub fn denormalize(cloud: &PointCloud) -> PointCloud {
    PointCloud {
        samples: cloud
            .samples
            .iter()
            .map(|s| PointSample {
                position: cloud.transform.invert(s.position),
                ..s.clone()
            })
            .collect(),
        transform: NormTransform::default(),
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn cloud_of(points: &[Vec3]) -> PointCloud {
        PointCloud {
            samples: points
                .iter()
                .map(|&p| PointSample {
                    position: p,
                    normal: [0.0, 0.0, 1.0],
                    feature: vec![],
                    source_face: 0,
                })
                .collect(),
            transform: NormTransform::default(),
        }
    }

    #[test]
    fn cube_split_and_determinism() {
        let m = Mesh::cuboid([0.0; 3], [1.0; 3]);
        let p = SampleParams {
            n: 2048,
            sharp_fraction: 0.5,
            angle_threshold_deg: 30.0,
            seed: 7,
            cover_all_faces: false,
        };
        let a = sample_point_cloud(&m, &p).unwrap();
        let b = sample_point_cloud(&m, &p).unwrap();
        assert_eq!(a, b);
        assert_eq!(a.len(), 2048);
        // Edge samples lie on two cube faces at once (two coordinates in {0, 1}).
        let on_edge = |q: &Vec3| q.iter().filter(|c| **c == 0.0 || **c == 1.0).count() >= 2;
        assert!(a.samples[1024..].iter().all(|s| on_edge(&s.position)));
        for s in &a.samples {
            assert!((vec3::norm(s.normal) - 1.0).abs() < 1e-6);
            assert!((s.source_face as usize) < 12);
        }
    }

    #[test]
    fn coverage_pass_one_per_face() {
        let m = Mesh::cuboid([0.0; 3], [2.0, 1.0, 0.5]);
        let p = SampleParams {
            n: 12,
            sharp_fraction: 0.0,
            angle_threshold_deg: 30.0,
            seed: 1,
            cover_all_faces: true,
        };
        let c = sample_point_cloud(&m, &p).unwrap();
        let faces: Vec<u32> = c.samples.iter().map(|s| s.source_face).collect();
        assert_eq!(faces, (0..12).collect::<Vec<u32>>());
        let too_few = SampleParams { n: 11, ..p };
        assert!(sample_point_cloud(&m, &too_few).is_err());
    }

    #[test]
    fn zero_samples_rejected() {
        let m = Mesh::cuboid([0.0; 3], [1.0; 3]);
        let p = SampleParams::training(0, 0);
        assert!(sample_point_cloud(&m, &p).is_err());
    }

    #[test]
    fn per_face_counts_follow_area() {
        // Multinomial oracle: count_f ~ Bin(n, a_f / A); require |count - n p| < 3 sigma.
        let m = Mesh::cuboid([0.0; 3], [3.0, 1.0, 0.5]);
        let n = 10_000;
        let p = SampleParams {
            n,
            sharp_fraction: 0.0,
            angle_threshold_deg: 30.0,
            seed: 42,
            cover_all_faces: false,
        };
        let c = sample_point_cloud(&m, &p).unwrap();
        let mut counts = [0usize; 12];
        for s in &c.samples {
            counts[s.source_face as usize] += 1;
        }
        let total = m.total_area();
        for f in 0..12 {
            let pf = m.face_area(f) / total;
            let mean = n as f64 * pf;
            let sigma = (n as f64 * pf * (1.0 - pf)).sqrt();
            assert!((counts[f] as f64 - mean).abs() < 3.0 * sigma, "face {f}: {} vs {mean}", counts[f]);
        }
    }

    #[test]
    fn normalize_examples() {
        let c = cloud_of(&[[0.0; 3], [2.0; 3], [1.0, 0.5, 2.0]]);
        let n = normalize(&c).unwrap();
        assert_eq!(n.transform.scale, 0.5);
        assert_eq!(n.transform.translation, [-0.5; 3]);
        let (lo, hi) = vec3::bounds(&n.positions()).unwrap();
        assert_eq!((lo, hi), ([-0.5; 3], [0.5; 3]));

        let again = normalize(&n).unwrap();
        assert!((again.transform.scale - n.transform.scale).abs() < 1e-9);
        for k in 0..3 {
            assert!((again.transform.translation[k] - n.transform.translation[k]).abs() < 1e-9);
        }

        let aniso = normalize(&cloud_of(&[[0.0; 3], [4.0, 1.0, 1.0]])).unwrap();
        let (lo, hi) = vec3::bounds(&aniso.positions()).unwrap();
        assert!((hi[0] - lo[0] - 1.0).abs() < 1e-12);
        assert!((hi[1] - lo[1] - 0.25).abs() < 1e-12);
        assert!((hi[2] - lo[2] - 0.25).abs() < 1e-12);

        let degenerate = normalize(&cloud_of(&[[3.0, 3.0, 3.0], [3.0, 3.0, 3.0]])).unwrap();
        assert_eq!(degenerate.transform.scale, 1.0);
        assert_eq!(degenerate.samples[0].position, [0.0; 3]);
    }

    #[test]
    fn denormalize_inverts() {
        let m = Mesh::cuboid([-3.0, 1.0, 2.0], [5.0, 2.0, 2.5]);
        let c = sample_point_cloud(&m, &SampleParams::training(256, 3)).unwrap();
        let back = denormalize(&normalize(&c).unwrap());
        for (a, b) in c.samples.iter().zip(&back.samples) {
            assert!(vec3::dist(a.position, b.position) < 1e-9);
        }
    }
}
