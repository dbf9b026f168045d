use std::collections::HashMap;
use std::path::{Path, PathBuf};

use nalgebra::{Isometry3, Translation3, UnitQuaternion, Vector3};
use roxmltree::{Document, Node};

use super::{
    GeometryElement, GeometrySource, Joint, JointLimits, JointType, Link, ModelError,
    RigidTransform, RobotModel,
};

/// Parse a URDF document. Mesh references are resolved against `mesh_root`
/// (`package://<pkg>/` prefixes are stripped), but meshes are not loaded.
pub fn parse_urdf(urdf_text: &str, mesh_root: &Path) -> Result<RobotModel, ModelError> {
    let doc = Document::parse(urdf_text)?;
    let robot = doc.root_element();
    if robot.tag_name().name() != "robot" {
        return Err(ModelError::NotARobot(robot.tag_name().name().to_string()));
    }
    let name = robot.attribute("name").unwrap_or("robot").to_string();

    let mut links = Vec::new();
    let mut link_index: HashMap<String, usize> = HashMap::new();
    for node in robot.children().filter(|n| n.has_tag_name("link")) {
        let link = parse_link(node, mesh_root)?;
        if link_index.insert(link.name.clone(), links.len()).is_some() {
            return Err(ModelError::DuplicateLink(link.name));
        }
        links.push(link);
    }

    let mut joints = Vec::new();
    let mut joint_names = HashMap::new();
    for node in robot.children().filter(|n| n.has_tag_name("joint")) {
        let joint = parse_joint(node, &link_index)?;
        if joint_names.insert(joint.name.clone(), ()).is_some() {
            return Err(ModelError::DuplicateJoint(joint.name));
        }
        joints.push(joint);
    }

    RobotModel::new(name, links, joints)
}

fn required<'a>(node: Node<'a, '_>, attribute: &str) -> Result<&'a str, ModelError> {
    node.attribute(attribute)
        .ok_or_else(|| ModelError::MissingAttribute {
            element: describe(node),
            attribute: attribute.to_string(),
        })
}

fn describe(node: Node) -> String {
    match node.attribute("name") {
        Some(name) => format!("<{} name=\"{}\">", node.tag_name().name(), name),
        None => format!("<{}>", node.tag_name().name()),
    }
}

fn parse_f64(text: &str, context: &str) -> Result<f64, ModelError> {
    text.trim().parse().map_err(|_| ModelError::InvalidNumber {
        context: context.to_string(),
        value: text.to_string(),
    })
}

fn parse_vec3(text: &str, context: &str) -> Result<Vector3<f64>, ModelError> {
    let values = text
        .split_whitespace()
        .map(|t| parse_f64(t, context))
        .collect::<Result<Vec<_>, _>>()?;
    match values.as_slice() {
        [x, y, z] => Ok(Vector3::new(*x, *y, *z)),
        _ => Err(ModelError::InvalidNumber {
            context: context.to_string(),
            value: text.to_string(),
        }),
    }
}

fn child<'a, 'i>(node: Node<'a, 'i>, tag: &str) -> Option<Node<'a, 'i>> {
    node.children().find(|n| n.has_tag_name(tag))
}

/// `<origin xyz rpy>`; URDF rpy is fixed-axis roll about x, then pitch about y, then yaw about z.
fn parse_origin(node: Option<Node>, context: &str) -> Result<RigidTransform, ModelError> {
    let Some(node) = node else {
        return Ok(Isometry3::identity());
    };
    let xyz = match node.attribute("xyz") {
        Some(t) => parse_vec3(t, context)?,
        None => Vector3::zeros(),
    };
    let rpy = match node.attribute("rpy") {
        Some(t) => parse_vec3(t, context)?,
        None => Vector3::zeros(),
    };
    Ok(Isometry3::from_parts(
        Translation3::from(xyz),
        UnitQuaternion::from_euler_angles(rpy.x, rpy.y, rpy.z),
    ))
}

fn parse_link(node: Node, mesh_root: &Path) -> Result<Link, ModelError> {
    let name = required(node, "name")?.to_string();
    let context = format!("link `{name}`");
    let elements = |tag: &str| -> Result<Vec<GeometryElement>, ModelError> {
        node.children()
            .filter(|n| n.has_tag_name(tag))
            .filter_map(|n| child(n, "geometry").map(|g| (n, g)))
            .filter_map(|(n, g)| {
                parse_geometry(g, mesh_root, &context)
                    .transpose()
                    .map(|source| (n, source))
            })
            .map(|(n, source)| {
                Ok(GeometryElement {
                    origin: parse_origin(child(n, "origin"), &context)?,
                    source: source?,
                })
            })
            .collect()
    };
    let inertial_origin = match child(node, "inertial") {
        Some(inertial) => parse_origin(child(inertial, "origin"), &context)?,
        None => Isometry3::identity(),
    };
    Ok(Link {
        visual: elements("visual")?,
        collision: elements("collision")?,
        name,
        inertial_origin,
    })
}

fn parse_geometry(
    geometry: Node,
    mesh_root: &Path,
    context: &str,
) -> Result<Option<GeometrySource>, ModelError> {
    let Some(shape) = geometry.children().find(|n| n.is_element()) else {
        return Ok(None);
    };
    let source = match shape.tag_name().name() {
        "mesh" => {
            let filename = required(shape, "filename")?;
            let scale = match shape.attribute("scale") {
                Some(t) => parse_vec3(t, context)?,
                None => Vector3::repeat(1.0),
            };
            GeometrySource::Mesh {
                path: resolve_mesh_path(filename, mesh_root),
                scale,
            }
        }
        "box" => GeometrySource::Box {
            size: parse_vec3(required(shape, "size")?, context)?,
        },
        "cylinder" => GeometrySource::Cylinder {
            radius: parse_f64(required(shape, "radius")?, context)?,
            length: parse_f64(required(shape, "length")?, context)?,
        },
        "sphere" => GeometrySource::Sphere {
            radius: parse_f64(required(shape, "radius")?, context)?,
        },
        other => {
            log::warn!("{context}: ignoring unsupported geometry <{other}>");
            return Ok(None);
        }
    };
    Ok(Some(source))
}

/// Resolve a URDF mesh reference against `mesh_root`.
pub(crate) fn resolve_mesh_path(filename: &str, mesh_root: &Path) -> PathBuf {
    if let Some(rest) = filename.strip_prefix("package://") {
        let relative = rest.split_once('/').map_or(rest, |(_, path)| path);
        return mesh_root.join(relative);
    }
    if let Some(absolute) = filename.strip_prefix("file://") {
        return PathBuf::from(absolute);
    }
    let path = Path::new(filename);
    if path.is_absolute() {
        path.to_path_buf()
    } else {
        mesh_root.join(path)
    }
}

fn parse_joint(node: Node, link_index: &HashMap<String, usize>) -> Result<Joint, ModelError> {
    let name = required(node, "name")?.to_string();
    let kind = required(node, "type")?;
    let joint_type = match kind {
        "revolute" => JointType::Revolute,
        "continuous" => JointType::Continuous,
        "prismatic" => JointType::Prismatic,
        "fixed" => JointType::Fixed,
        "planar" | "floating" => {
            return Err(ModelError::UnsupportedJointType {
                joint: name,
                kind: kind.to_string(),
            })
        }
        _ => {
            return Err(ModelError::UnknownJointType {
                joint: name,
                kind: kind.to_string(),
            })
        }
    };
    let context = format!("joint `{name}`");
    let link_ref = |tag: &str| -> Result<usize, ModelError> {
        let element = child(node, tag).ok_or_else(|| ModelError::MissingAttribute {
            element: format!("<joint name=\"{name}\">"),
            attribute: format!("<{tag} link=...>"),
        })?;
        let link = required(element, "link")?;
        link_index
            .get(link)
            .copied()
            .ok_or_else(|| ModelError::MissingLink {
                joint: name.clone(),
                link: link.to_string(),
            })
    };
    let parent = link_ref("parent")?;
    let child_link = link_ref("child")?;
    let origin = parse_origin(child(node, "origin"), &context)?;

    let mut axis = match child(node, "axis").and_then(|a| a.attribute("xyz")) {
        Some(t) => parse_vec3(t, &context)?,
        None => Vector3::x(),
    };
    if joint_type.is_actuated() {
        let norm = axis.norm();
        if norm < 1e-12 {
            return Err(ModelError::ZeroAxis(name));
        }
        axis /= norm;
    }

    let limits = match joint_type {
        JointType::Revolute | JointType::Prismatic => {
            let limit = child(node, "limit").ok_or_else(|| ModelError::MissingLimits(name.clone()))?;
            let lower = match limit.attribute("lower") {
                Some(t) => parse_f64(t, &context)?,
                None => 0.0,
            };
            let upper = match limit.attribute("upper") {
                Some(t) => parse_f64(t, &context)?,
                None => 0.0,
            };
            if lower.is_nan() || upper.is_nan() || lower > upper {
                return Err(ModelError::InvalidLimits {
                    joint: name,
                    lower,
                    upper,
                });
            }
            Some(JointLimits { lower, upper })
        }
        JointType::Continuous | JointType::Fixed => None,
    };

    Ok(Joint {
        name,
        joint_type,
        parent,
        child: child_link,
        origin,
        axis,
        limits,
    })
}
