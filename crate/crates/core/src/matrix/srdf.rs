//! Import of MoveIt `disable_collisions` entries as a link-level hull matrix.

use super::{MatrixError, SkipEntry, SkipMatrix, SkipReason};
use crate::geometry::ShapeType;
use crate::model::RobotModel;
use crate::proximity::ShapeSlot;

#[derive(Clone, Debug, PartialEq)]
pub struct SrdfImport {
    pub matrix: SkipMatrix,
    /// One line per entry that could not be imported.
    pub warnings: Vec<String>,
}

/// Build a `hull_link` matrix from an SRDF document. `layout` is the hull_link index space.
///
/// Entries naming unknown links, links without geometry, or a link twice are dropped
/// with a warning. The original reason attribute is kept as the entry annotation.
pub fn import_moveit_srdf(
    srdf_xml: &str,
    model: &RobotModel,
    layout: &[ShapeSlot],
) -> Result<SrdfImport, MatrixError> {
    let doc = roxmltree::Document::parse(srdf_xml)?;
    let mut matrix = SkipMatrix::empty(&model.name, ShapeType::HullLink, layout);
    let mut warnings = Vec::new();
    let shape_of = |name: &str| layout.iter().find(|s| s.link_name == name).map(|s| s.index);

    for node in doc
        .descendants()
        .filter(|n| n.has_tag_name("disable_collisions"))
    {
        let line = doc.text_pos_at(node.range().start).row;
        let (Some(link1), Some(link2)) = (node.attribute("link1"), node.attribute("link2")) else {
            warnings.push(format!("line {line}: disable_collisions needs link1 and link2"));
            continue;
        };
        let reason = node.attribute("reason").map(str::to_string);
        let mut resolve = |name: &str| {
            if model.link_index(name).is_none() {
                warnings.push(format!("line {line}: unknown link `{name}`"));
                None
            } else if let Some(index) = shape_of(name) {
                Some(index)
            } else {
                warnings.push(format!("line {line}: link `{name}` has no collision geometry"));
                None
            }
        };
        let (a, b) = (resolve(link1), resolve(link2));
        let (Some(a), Some(b)) = (a, b) else {
            continue;
        };
        if a == b {
            warnings.push(format!("line {line}: `{link1}` is paired with itself"));
            continue;
        }
        let inserted = matrix.insert_if_absent(SkipEntry {
            i: a.min(b),
            j: a.max(b),
            reason: SkipReason::Imported,
            annotation: reason,
        });
        if !inserted {
            warnings.push(format!("line {line}: duplicate entry for `{link1}`/`{link2}`"));
        }
    }
    Ok(SrdfImport { matrix, warnings })
}
