//! URDF bundle: `object.urdf` plus one OBJ per part under `meshes/`.
//!
//! All link frames are axis-aligned with the mesh frame. A revolute joint's origin
//! sits on the axis point; prismatic and fixed joints reuse the parent link origin.
//! Visual origins undo the link offset, so part OBJ files hold mesh-frame coordinates.
//!
//! A part of type "both" becomes `parent -(prismatic)-> part_<i>_slide -(revolute)-> part_<i>`,
//! where the slide link has no geometry. Chained this way the child is rotated first and
//! translated second, matching the local transform used for posing.
//!
//! Each face line in a part OBJ is preceded by `# face <index>` so that import can
//! restore the original face order.

use std::collections::HashMap;
use std::f64::consts::PI;
use std::fmt::Write as _;
use std::path::{Path, PathBuf};

use crate::error::{Error, Result};
use crate::geometry::obj::parse_obj;
use crate::geometry::{vec3, Mesh, Rigid, Vec3};

use super::structure::{ArticulatedStructure, MotionSpec, MotionType, Prismatic, Revolute};

pub const URDF_FILE: &str = "object.urdf";

fn num(x: f64) -> String {
    if x == 0.0 {
        "0".to_string()
    } else {
        format!("{x}")
    }
}

fn triple(v: Vec3) -> String {
    format!("{} {} {}", num(v[0]), num(v[1]), num(v[2]))
}

fn part_obj(mesh: &Mesh, labels: &[u32], part: u32) -> String {
    let faces: Vec<usize> = (0..mesh.faces.len()).filter(|&f| labels[f] == part).collect();
    let mut remap: HashMap<u32, usize> = HashMap::new();
    let mut verts = String::new();
    let mut body = String::new();
    for &f in &faces {
        let idx = mesh.faces[f].map(|v| {
            let next = remap.len() + 1;
            *remap.entry(v).or_insert_with(|| {
                let p = mesh.vertices[v as usize];
                let _ = writeln!(verts, "v {}", triple(p));
                next
            })
        });
        let _ = writeln!(body, "# face {f}\nf {} {} {}", idx[0], idx[1], idx[2]);
    }
    format!("# part {part}\n{verts}{body}")
}

fn link_xml(out: &mut String, name: &str, mesh_file: Option<&str>, offset: Vec3) {
    let _ = writeln!(out, "  <link name=\"{name}\">");
    if let Some(file) = mesh_file {
        let _ = writeln!(
            out,
            "    <visual>\n      <origin xyz=\"{}\" rpy=\"0 0 0\"/>\n      <geometry>\n        <mesh filename=\"{file}\"/>\n      </geometry>\n    </visual>",
            triple(vec3::scale(offset, -1.0))
        );
        let _ = writeln!(
            out,
            "    <inertial>\n      <mass value=\"1\"/>\n      <inertia ixx=\"1\" ixy=\"0\" ixz=\"0\" iyy=\"1\" iyz=\"0\" izz=\"1\"/>\n    </inertial>"
        );
    }
    let _ = writeln!(out, "  </link>");
}

#[allow(clippy::too_many_arguments)]
fn joint_xml(
    out: &mut String,
    name: &str,
    kind: &str,
    parent: &str,
    child: &str,
    origin: Vec3,
    axis: Option<Vec3>,
    range: Option<[f64; 2]>,
) {
    let _ = writeln!(out, "  <joint name=\"{name}\" type=\"{kind}\">");
    let _ = writeln!(out, "    <parent link=\"{parent}\"/>\n    <child link=\"{child}\"/>");
    let _ = writeln!(out, "    <origin xyz=\"{}\" rpy=\"0 0 0\"/>", triple(origin));
    if let Some(a) = axis {
        let _ = writeln!(out, "    <axis xyz=\"{}\"/>", triple(a));
    }
    if let Some(r) = range {
        let _ = writeln!(
            out,
            "    <limit lower=\"{}\" upper=\"{}\" effort=\"1\" velocity=\"1\"/>",
            num(-r[0]),
            num(r[1])
        );
    }
    let _ = writeln!(out, "  </joint>");
}

/// URDF document text for `structure`; part meshes are referenced as `meshes/part_<i>.obj`.
pub fn urdf_string(structure: &ArticulatedStructure, name: &str) -> Result<String> {
    structure.validate()?;
    let order = structure.topological_order()?;
    let mut origin = vec![[0.0; 3]; structure.part_count];
    for &c in &order {
        if let Some(p) = structure.parent[c] {
            origin[c] = structure.motion[c].revolute.map_or(origin[p], |r| r.point);
        }
    }
    let mut out = format!("<?xml version=\"1.0\"?>\n<robot name=\"{name}\">\n");
    for c in 0..structure.part_count {
        let file = format!("meshes/part_{c}.obj");
        link_xml(&mut out, &format!("part_{c}"), Some(&file), origin[c]);
    }
    for &c in &order {
        let Some(p) = structure.parent[c] else { continue };
        let m = &structure.motion[c];
        let (parent, child) = (format!("part_{p}"), format!("part_{c}"));
        let rel = vec3::sub(origin[c], origin[p]);
        let jname = format!("joint_{c}");
        match m.motion_type {
            MotionType::Fixed => joint_xml(&mut out, &jname, "fixed", &parent, &child, [0.0; 3], None, None),
            MotionType::Prismatic => {
                let pr = m.prismatic.expect("validated");
                joint_xml(&mut out, &jname, "prismatic", &parent, &child, rel, Some(pr.direction), Some(pr.range));
            }
            MotionType::Revolute => {
                let r = m.revolute.expect("validated");
                joint_xml(&mut out, &jname, "revolute", &parent, &child, rel, Some(r.direction), Some(r.range));
            }
            MotionType::Both => {
                let pr = m.prismatic.expect("validated");
                let r = m.revolute.expect("validated");
                let slide = format!("part_{c}_slide");
                link_xml(&mut out, &slide, None, origin[p]);
                joint_xml(
                    &mut out,
                    &format!("joint_{c}_slide"),
                    "prismatic",
                    &parent,
                    &slide,
                    [0.0; 3],
                    Some(pr.direction),
                    Some(pr.range),
                );
                joint_xml(&mut out, &jname, "revolute", &slide, &child, rel, Some(r.direction), Some(r.range));
            }
        }
    }
    out.push_str("</robot>\n");
    Ok(out)
}

/// Writes `out_dir/object.urdf` and `out_dir/meshes/part_<i>.obj`; returns the URDF path.
pub fn export_urdf(mesh: &Mesh, structure: &ArticulatedStructure, out_dir: &Path) -> Result<PathBuf> {
    structure.validate_for(mesh.faces.len())?;
    let doc = urdf_string(structure, "object")?;
    let mesh_dir = out_dir.join("meshes");
    std::fs::create_dir_all(&mesh_dir).map_err(|e| Error::io(&mesh_dir, e))?;
    for c in 0..structure.part_count {
        let path = mesh_dir.join(format!("part_{c}.obj"));
        std::fs::write(&path, part_obj(mesh, &structure.face_labels, c as u32)).map_err(|e| Error::io(&path, e))?;
    }
    let path = out_dir.join(URDF_FILE);
    std::fs::write(&path, doc).map_err(|e| Error::io(&path, e))?;
    Ok(path)
}

fn parse_floats<const N: usize>(s: Option<&str>, default: [f64; N], what: &str) -> Result<[f64; N]> {
    let Some(s) = s else { return Ok(default) };
    let vals: Vec<f64> = s
        .split_whitespace()
        .map(|t| t.parse::<f64>())
        .collect::<std::result::Result<_, _>>()
        .map_err(|e| Error::parse(format!("{what}: {e}")))?;
    vals.try_into()
        .map_err(|_| Error::parse(format!("{what}: expected {N} numbers in {s:?}")))
}

fn rpy_rigid(xyz: Vec3, rpy: Vec3) -> Rigid {
    let rx = vec3::rotation([1.0, 0.0, 0.0], rpy[0]);
    let ry = vec3::rotation([0.0, 1.0, 0.0], rpy[1]);
    let rz = vec3::rotation([0.0, 0.0, 1.0], rpy[2]);
    Rigid {
        rot: vec3::mat_mul(&rz, &vec3::mat_mul(&ry, &rx)),
        trans: xyz,
    }
}

fn origin_of(node: Option<roxmltree::Node>) -> Result<Rigid> {
    let Some(o) = node.and_then(|n| n.children().find(|c| c.has_tag_name("origin"))) else {
        return Ok(Rigid::IDENTITY);
    };
    let xyz = parse_floats(o.attribute("xyz"), [0.0; 3], "origin xyz")?;
    let rpy = parse_floats(o.attribute("rpy"), [0.0; 3], "origin rpy")?;
    Ok(rpy_rigid(xyz, rpy))
}

struct LinkInfo {
    name: String,
    mesh: Option<(String, Rigid, Vec3)>,
}

struct JointInfo {
    kind: String,
    parent: String,
    child: String,
    origin: Rigid,
    axis: Vec3,
    range: [f64; 2],
}

fn child_tag<'a>(n: roxmltree::Node<'a, 'a>, tag: &str) -> Option<roxmltree::Node<'a, 'a>> {
    n.children().find(|c| c.has_tag_name(tag))
}

fn parse_doc(text: &str) -> Result<(Vec<LinkInfo>, Vec<JointInfo>)> {
    let doc = roxmltree::Document::parse(text).map_err(|e| Error::parse(format!("URDF: {e}")))?;
    let robot = doc.root_element();
    if !robot.has_tag_name("robot") {
        return Err(Error::parse("URDF root element must be <robot>"));
    }
    let mut links = Vec::new();
    for l in robot.children().filter(|c| c.has_tag_name("link")) {
        let name = l.attribute("name").ok_or_else(|| Error::parse("link without name"))?;
        let visual = child_tag(l, "visual");
        let mesh = match visual.and_then(|v| child_tag(v, "geometry")).and_then(|g| child_tag(g, "mesh")) {
            Some(m) => {
                let file = m.attribute("filename").ok_or_else(|| Error::parse("mesh without filename"))?;
                let scale = parse_floats(m.attribute("scale"), [1.0; 3], "mesh scale")?;
                Some((file.to_string(), origin_of(visual)?, scale))
            }
            None => None,
        };
        links.push(LinkInfo {
            name: name.to_string(),
            mesh,
        });
    }
    let mut joints = Vec::new();
    for j in robot.children().filter(|c| c.has_tag_name("joint")) {
        let kind = j.attribute("type").ok_or_else(|| Error::parse("joint without type"))?;
        let link_of = |tag: &str| -> Result<String> {
            child_tag(j, tag)
                .and_then(|n| n.attribute("link"))
                .map(str::to_string)
                .ok_or_else(|| Error::parse(format!("joint without {tag} link")))
        };
        let axis = parse_floats(child_tag(j, "axis").and_then(|a| a.attribute("xyz")), [1.0, 0.0, 0.0], "axis")?;
        let limit = child_tag(j, "limit");
        let lower = parse_floats(limit.and_then(|l| l.attribute("lower")), [0.0], "limit lower")?[0];
        let upper = parse_floats(limit.and_then(|l| l.attribute("upper")), [0.0], "limit upper")?[0];
        let range = if kind == "continuous" { [PI, PI] } else { [-lower, upper] };
        joints.push(JointInfo {
            kind: kind.to_string(),
            parent: link_of("parent")?,
            child: link_of("child")?,
            origin: origin_of(Some(j))?,
            axis,
            range,
        });
    }
    Ok((links, joints))
}

fn read_part_obj(path: &Path) -> Result<(Mesh, Vec<usize>)> {
    let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    let mesh = parse_obj(&text)?;
    let order: Vec<usize> = text
        .lines()
        .filter_map(|l| l.strip_prefix("# face "))
        .filter_map(|t| t.trim().parse().ok())
        .collect();
    Ok((mesh, order))
}

/// Inverse of [`export_urdf`]. Also accepts plain URDF files: links without an
/// auxiliary pattern map to parts in document order.
pub fn import_urdf(path: &Path) -> Result<(Mesh, ArticulatedStructure)> {
    let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    let base_dir = path.parent().unwrap_or(Path::new("."));
    let (links, joints) = parse_doc(&text)?;
    let link_idx: HashMap<&str, usize> = links.iter().enumerate().map(|(i, l)| (l.name.as_str(), i)).collect();
    let lookup = |n: &str| -> Result<usize> {
        link_idx
            .get(n)
            .copied()
            .ok_or_else(|| Error::parse(format!("joint references unknown link {n}")))
    };
    let mut parent_joint: Vec<Option<usize>> = vec![None; links.len()];
    for (ji, j) in joints.iter().enumerate() {
        let c = lookup(&j.child)?;
        lookup(&j.parent)?;
        if parent_joint[c].replace(ji).is_some() {
            return Err(Error::InvalidStructure(format!("link {} has two parent joints", j.child)));
        }
        if !matches!(j.kind.as_str(), "fixed" | "prismatic" | "revolute" | "continuous") {
            return Err(Error::parse(format!("unsupported joint type {}", j.kind)));
        }
    }
    let roots: Vec<usize> = (0..links.len()).filter(|&l| parent_joint[l].is_none()).collect();
    if roots.len() != 1 {
        return Err(Error::InvalidStructure(format!("expected one root link, found {}", roots.len())));
    }

    // world frames, parents first
    let mut frame: Vec<Option<Rigid>> = vec![None; links.len()];
    frame[roots[0]] = Some(Rigid::IDENTITY);
    let mut progress = true;
    while progress {
        progress = false;
        for j in &joints {
            let (p, c) = (link_idx[j.parent.as_str()], link_idx[j.child.as_str()]);
            if frame[c].is_none() {
                if let Some(fp) = frame[p] {
                    frame[c] = Some(fp.compose(&j.origin));
                    progress = true;
                }
            }
        }
    }
    let frame: Vec<Rigid> = frame
        .into_iter()
        .collect::<Option<_>>()
        .ok_or_else(|| Error::InvalidStructure("URDF links do not form a tree".into()))?;

    // auxiliary slide links: no geometry, prismatic in, single revolute out
    let is_aux = |l: usize| -> bool {
        links[l].mesh.is_none()
            && parent_joint[l].is_some_and(|j| joints[j].kind == "prismatic")
            && joints.iter().filter(|j| j.parent == links[l].name).count() == 1
            && joints.iter().any(|j| j.parent == links[l].name && j.kind == "revolute")
    };
    let part_links: Vec<usize> = (0..links.len()).filter(|&l| !is_aux(l)).collect();
    let parsed_ids: Option<Vec<usize>> = part_links
        .iter()
        .map(|&l| links[l].name.strip_prefix("part_").and_then(|s| s.parse().ok()))
        .collect();
    let part_of_link: HashMap<usize, usize> = match parsed_ids {
        Some(ids) if {
            let mut sorted = ids.clone();
            sorted.sort_unstable();
            sorted.iter().enumerate().all(|(i, &k)| i == k)
        } =>
        {
            part_links.iter().copied().zip(ids).collect()
        }
        _ => part_links.iter().enumerate().map(|(i, &l)| (l, i)).collect(),
    };
    let n = part_links.len();
    let mut parent = vec![None; n];
    let mut motion = vec![MotionSpec::FIXED; n];
    let unit = |v: Vec3| vec3::normalized(v).ok_or_else(|| Error::InvalidStructure("zero joint axis".into()));
    for &l in &part_links {
        let id = part_of_link[&l];
        let Some(ji) = parent_joint[l] else { continue };
        let j = &joints[ji];
        let mut pl = link_idx[j.parent.as_str()];
        let axis_world = unit(frame[l].apply_vector(j.axis))?;
        let revolute = Revolute {
            direction: axis_world,
            point: frame[l].trans,
            range: j.range,
        };
        let prismatic = Prismatic {
            direction: axis_world,
            range: j.range,
        };
        motion[id] = match j.kind.as_str() {
            "fixed" => MotionSpec::FIXED,
            "prismatic" => MotionSpec::prismatic(prismatic.direction, prismatic.range),
            _ if is_aux(pl) => {
                let sj = &joints[parent_joint[pl].expect("aux has a parent joint")];
                let slide = Prismatic {
                    direction: unit(frame[pl].apply_vector(sj.axis))?,
                    range: sj.range,
                };
                pl = link_idx[sj.parent.as_str()];
                MotionSpec::both(slide, revolute)
            }
            _ => MotionSpec::revolute(revolute.direction, revolute.point, revolute.range),
        };
        parent[id] = Some(part_of_link[&pl]);
    }

    // geometry
    let mut pieces: Vec<(usize, Mesh, Vec<usize>)> = Vec::new();
    for &l in &part_links {
        let Some((file, vis, scale)) = &links[l].mesh else { continue };
        let (mut m, order) = read_part_obj(&base_dir.join(file))?;
        let to_world = frame[l].compose(vis);
        for v in &mut m.vertices {
            *v = to_world.apply([v[0] * scale[0], v[1] * scale[1], v[2] * scale[2]]);
        }
        pieces.push((part_of_link[&l], m, order));
    }
    let total: usize = pieces.iter().map(|p| p.1.faces.len()).sum();
    let mut slots: Vec<Option<usize>> = vec![None; total];
    let ordered = pieces.iter().all(|(_, m, o)| o.len() == m.faces.len())
        && pieces
            .iter()
            .flat_map(|p| p.2.iter())
            .all(|&f| f < total && slots[f].replace(0).is_none());
    let mut mesh = Mesh::default();
    let mut face_labels = vec![0u32; total];
    let mut faces = vec![[0u32; 3]; total];
    let mut next = 0;
    for (id, m, order) in &pieces {
        let off = mesh.vertices.len() as u32;
        mesh.vertices.extend_from_slice(&m.vertices);
        for (k, f) in m.faces.iter().enumerate() {
            let slot = if ordered { order[k] } else { next };
            next += 1;
            faces[slot] = f.map(|v| v + off);
            face_labels[slot] = *id as u32;
        }
    }
    mesh.faces = faces;
    let s = ArticulatedStructure {
        part_count: n,
        face_labels,
        parent,
        motion,
    };
    s.validate_for(mesh.faces.len())?;
    Ok((mesh, s))
}
