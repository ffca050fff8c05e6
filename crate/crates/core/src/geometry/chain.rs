use std::collections::{HashMap, VecDeque};

use super::{GeometryError, RigidTransform};

/// A link maps coordinates expressed in `from` into `to`.
#[derive(Debug, Clone, PartialEq)]
pub struct FrameLink {
    pub from: String,
    pub to: String,
    pub transform: RigidTransform,
}

/// Ordered set of rigid links between named frames, e.g.
/// object → board → optical camera → X-ray source.
///
/// Links may be traversed in either direction; walking a link backwards uses
/// its inverse.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct FrameChain {
    links: Vec<FrameLink>,
}

impl FrameChain {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn with_link(mut self, from: &str, to: &str, transform: RigidTransform) -> Self {
        self.push(from, to, transform);
        self
    }

    pub fn push(&mut self, from: &str, to: &str, transform: RigidTransform) {
        self.links.push(FrameLink {
            from: from.to_owned(),
            to: to.to_owned(),
            transform,
        });
    }

    pub fn links(&self) -> &[FrameLink] {
        &self.links
    }

    pub fn contains(&self, frame: &str) -> bool {
        self.links.iter().any(|l| l.from == frame || l.to == frame)
    }

    /// Transform taking coordinates in `from` to coordinates in `to`.
    ///
    /// Breadth-first over the link graph so the shortest path wins; ties are
    /// resolved by link order.
    pub fn resolve(&self, from: &str, to: &str) -> Result<RigidTransform, GeometryError> {
        for frame in [from, to] {
            if !self.contains(frame) {
                return Err(GeometryError::UnknownFrame(frame.to_owned()));
            }
        }
        if from == to {
            return Ok(RigidTransform::identity());
        }

        // accumulated transform from `from` into the visited frame
        let mut reached: HashMap<&str, RigidTransform> = HashMap::new();
        reached.insert(from, RigidTransform::identity());
        let mut queue = VecDeque::from([from]);
        while let Some(frame) = queue.pop_front() {
            let acc = reached[frame];
            for link in &self.links {
                let (next, step) = if link.from == frame {
                    (link.to.as_str(), link.transform)
                } else if link.to == frame {
                    (link.from.as_str(), link.transform.inverse())
                } else {
                    continue;
                };
                if reached.contains_key(next) {
                    continue;
                }
                let total = step.compose(&acc);
                if next == to {
                    return Ok(total);
                }
                reached.insert(next, total);
                queue.push_back(next);
            }
        }
        Err(GeometryError::Disconnected {
            from: from.to_owned(),
            to: to.to_owned(),
        })
    }
}
