use std::sync::Arc;

use serde::{Deserialize, Serialize};

use super::plane::{check_normalized, ImagePlane};
use crate::{Error, Result};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum ChannelKind {
    Image,
    Feature,
    Score,
    External,
}

#[derive(Clone, Debug)]
pub struct Channel {
    pub name: String,
    pub kind: ChannelKind,
    pub plane: Arc<ImagePlane>,
}

/// Named, pixel-aligned planes. Planes are shared, so assembling a stack
/// from another one never copies or resamples pixel data.
#[derive(Clone, Debug)]
pub struct ChannelStack {
    width: usize,
    height: usize,
    channels: Vec<Channel>,
}

impl ChannelStack {
    pub fn new(width: usize, height: usize) -> Result<Self> {
        super::plane::check_dims(width, height)?;
        Ok(Self {
            width,
            height,
            channels: Vec::new(),
        })
    }

    /// A stack holding `image` under the channel name `image`.
    pub fn from_image(image: ImagePlane) -> Self {
        let (w, h) = image.dims();
        let mut s = Self {
            width: w,
            height: h,
            channels: Vec::new(),
        };
        s.channels.push(Channel {
            name: "image".into(),
            kind: ChannelKind::Image,
            plane: Arc::new(image),
        });
        s
    }

    pub fn width(&self) -> usize {
        self.width
    }

    pub fn height(&self) -> usize {
        self.height
    }

    pub fn dims(&self) -> (usize, usize) {
        (self.width, self.height)
    }

    pub fn len(&self) -> usize {
        self.channels.len()
    }

    pub fn is_empty(&self) -> bool {
        self.channels.is_empty()
    }

    pub fn channels(&self) -> &[Channel] {
        &self.channels
    }

    pub fn names(&self) -> impl Iterator<Item = &str> {
        self.channels.iter().map(|c| c.name.as_str())
    }

    pub fn push(
        &mut self,
        name: impl Into<String>,
        kind: ChannelKind,
        plane: ImagePlane,
    ) -> Result<()> {
        self.push_shared(name, kind, Arc::new(plane))
    }

    pub fn push_shared(
        &mut self,
        name: impl Into<String>,
        kind: ChannelKind,
        plane: Arc<ImagePlane>,
    ) -> Result<()> {
        let name = name.into();
        plane.ensure_same_dims(self.dims())?;
        if self.channels.iter().any(|c| c.name == name) {
            return Err(Error::DuplicateChannel(name));
        }
        if kind == ChannelKind::Score {
            check_normalized(&plane)?;
        }
        self.channels.push(Channel { name, kind, plane });
        Ok(())
    }

    pub fn get(&self, name: &str) -> Option<&Arc<ImagePlane>> {
        self.channels
            .iter()
            .find(|c| c.name == name)
            .map(|c| &c.plane)
    }

    pub fn require(&self, name: &str) -> Result<&Arc<ImagePlane>> {
        self.get(name)
            .ok_or_else(|| Error::MissingChannel(name.to_string()))
    }

    pub fn kind_of(&self, name: &str) -> Option<ChannelKind> {
        self.channels
            .iter()
            .find(|c| c.name == name)
            .map(|c| c.kind)
    }

    /// The channels of the given kinds, in stack order.
    pub fn select_kinds(&self, kinds: &[ChannelKind]) -> ChannelStack {
        ChannelStack {
            width: self.width,
            height: self.height,
            channels: self
                .channels
                .iter()
                .filter(|c| kinds.contains(&c.kind))
                .cloned()
                .collect(),
        }
    }

    /// A new stack with `names` in the given order.
    pub fn select(&self, names: &[String]) -> Result<ChannelStack> {
        let mut out = ChannelStack::new(self.width, self.height)?;
        for n in names {
            let c = self
                .channels
                .iter()
                .find(|c| &c.name == n)
                .ok_or_else(|| Error::MissingChannel(n.clone()))?;
            out.channels.push(c.clone());
        }
        Ok(out)
    }

    /// Appends every channel of `other` (names must not collide).
    pub fn extend_from(&mut self, other: &ChannelStack) -> Result<()> {
        for c in &other.channels {
            self.push_shared(c.name.clone(), c.kind, c.plane.clone())?;
        }
        Ok(())
    }
}
