//! Raw detections to VMRs.

use log::debug;

use super::{Kb, Vmr, VmrObject};
use crate::sim::Detection;
use crate::types::{AgentId, Point, Pose};

/// Detections below this confidence are discarded.
pub const CONFIDENCE_FLOOR: f64 = 0.2;

/// Where the observing robot was, and the world bounds in metres.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Frame {
    pub pose: Pose,
    pub tick: u64,
    pub width: f64,
    pub height: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct PerceptOutcome {
    pub vmr: Vmr,
    /// Class labels with no ontology concept; those detections were dropped.
    pub unknown_labels: Vec<String>,
}

/// Map class labels to concepts, project to world coordinates, drop weak or
/// out-of-bounds detections and merge duplicate instances keeping the
/// highest confidence. Detections without an instance id get one
/// synthesized from the robot, tick and position in the batch.
pub fn interpret_percept(
    detections: &[Detection],
    robot_id: &AgentId,
    kb: &Kb,
    frame: &Frame,
) -> PerceptOutcome {
    let mut objects: Vec<VmrObject> = Vec::new();
    let mut unknown_labels = Vec::new();
    for (i, d) in detections.iter().enumerate() {
        let Some(concept) = kb.ontology.concept_for_label(&d.class_label) else {
            debug!(
                "{robot_id}: unknown class label `{}` dropped",
                d.class_label
            );
            unknown_labels.push(d.class_label.clone());
            continue;
        };
        if !(d.confidence >= CONFIDENCE_FLOOR && d.confidence <= 1.0) {
            continue;
        }
        let position = frame
            .pose
            .project(d.relative_position.range, d.relative_position.bearing);
        if !in_bounds(position, frame) {
            continue;
        }
        let instance_id = d
            .instance
            .clone()
            .unwrap_or_else(|| format!("{robot_id}-{}-{i}", frame.tick));
        match objects.iter_mut().find(|o| o.instance_id == instance_id) {
            Some(o) if d.confidence > o.confidence => {
                o.confidence = d.confidence;
                o.position = position;
                o.concept = concept.to_string();
            }
            Some(_) => {}
            None => objects.push(VmrObject {
                instance_id,
                concept: concept.to_string(),
                position,
                confidence: d.confidence,
            }),
        }
    }
    PerceptOutcome {
        vmr: Vmr {
            vmr_id: format!("vmr-{robot_id}-{}", frame.tick),
            robot_id: robot_id.clone(),
            objects,
            tick: frame.tick,
        },
        unknown_labels,
    }
}

fn in_bounds(p: Point, frame: &Frame) -> bool {
    p.x >= 0.0 && p.y >= 0.0 && p.x <= frame.width && p.y <= frame.height
}
