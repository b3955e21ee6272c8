//! Synthetic scenes with ground truth, and oracle experts over them.

mod oracle;
mod scene;

pub use oracle::{contained, ConstantAnswerer, OracleExperts, CONTAINMENT, MIN_RESOLVABLE};
pub use scene::{
    generate_scene, render, target_side, tokens, Background, DecoyParams, QuestionKind, Role,
    SceneObject, SceneParams, SceneQuestion, SceneSpec, Shape, SynthError, CANVAS_MARGIN,
    OBJECT_GAP, PALETTE,
};
