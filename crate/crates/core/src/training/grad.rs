use ndarray::Array2;

use crate::model::{InputMap, KoopmanModel};
use crate::numcore::GradientBundle;

#[derive(Clone, Debug, PartialEq)]
pub enum InputMapGrad {
    Network(GradientBundle),
    Constant(Array2<f64>),
}

/// Gradient with respect to every parameter of a [`KoopmanModel`], same layout.
#[derive(Clone, Debug, PartialEq)]
pub struct ModelGrad {
    pub a: Array2<f64>,
    pub c: Array2<f64>,
    pub input_map: Option<InputMapGrad>,
    pub encoder: GradientBundle,
}

impl ModelGrad {
    pub fn zeros_like(model: &KoopmanModel) -> Self {
        ModelGrad {
            a: Array2::zeros(model.a.raw_dim()),
            c: Array2::zeros(model.c.raw_dim()),
            input_map: model.input_map.as_ref().map(|m| match m {
                InputMap::Network(net) => InputMapGrad::Network(GradientBundle::zeros_like(net)),
                InputMap::Constant(b) => InputMapGrad::Constant(Array2::zeros(b.raw_dim())),
            }),
            encoder: GradientBundle::zeros_like(&model.encoder),
        }
    }

    pub fn add_assign(&mut self, other: &ModelGrad) {
        self.a += &other.a;
        self.c += &other.c;
        match (&mut self.input_map, &other.input_map) {
            (Some(InputMapGrad::Network(g)), Some(InputMapGrad::Network(o))) => g.add_assign(o),
            (Some(InputMapGrad::Constant(g)), Some(InputMapGrad::Constant(o))) => *g += o,
            (None, None) => {}
            _ => panic!("gradients of differently structured models"),
        }
        self.encoder.add_assign(&other.encoder);
    }

    pub fn scale(&mut self, factor: f64) {
        self.a *= factor;
        self.c *= factor;
        match &mut self.input_map {
            Some(InputMapGrad::Network(g)) => g.scale(factor),
            Some(InputMapGrad::Constant(g)) => *g *= factor,
            None => {}
        }
        self.encoder.scale(factor);
    }

    /// Same ordering as [`KoopmanModel::param_slices`].
    pub fn param_slices(&self) -> Vec<&[f64]> {
        let mut out = vec![self.a.as_slice().expect("standard layout"), self.c.as_slice().expect("standard layout")];
        match &self.input_map {
            Some(InputMapGrad::Network(g)) => out.extend(g.param_slices()),
            Some(InputMapGrad::Constant(g)) => out.push(g.as_slice().expect("standard layout")),
            None => {}
        }
        out.extend(self.encoder.param_slices());
        out
    }

    pub fn to_vec(&self) -> Vec<f64> {
        self.param_slices().concat()
    }
}
