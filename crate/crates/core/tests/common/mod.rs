#![allow(dead_code)]

use std::path::PathBuf;

use skipset::assets::build_shapes;
use skipset::geometry::{DecompositionParams, LinkShapes};
use skipset::model::{parse_urdf, RobotModel};

pub fn quad_dir() -> PathBuf {
    PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("tests/fixtures/quad")
}

pub fn quad_model() -> RobotModel {
    let dir = quad_dir();
    let text = std::fs::read_to_string(dir.join("quad.urdf")).unwrap();
    parse_urdf(&text, &dir).unwrap()
}

pub fn quad() -> (RobotModel, Vec<LinkShapes>) {
    let model = quad_model();
    let shapes = build_shapes(&model, &DecompositionParams::default()).unwrap();
    (model, shapes)
}
