//! Named architecture specs.
//!
//! - `paper-24`: the full 24-layer, 8-stage network (227x227x3 input).
//! - `local-cnn`: its stages 1, 2, and the classifier stage only.
//! - `mini`: a desk-scale analogue (32x32x3 input) with the same stage
//!   pattern, used for end-to-end training runs.
//! - `mini-local`: stages 1, 2, and the classifier stage of `mini`.
//!
//! Strides and paddings for `paper-24` follow the published values of the
//! base architecture: conv1 stride 4 pad 0, conv2 pad 2, conv3-5 pad 1, all
//! pools 3x3 stride 2. That is the one assignment under which the stage
//! sizes compose into the 4096-wide dense stage.

use super::{LayerSpec, NetworkSpec};
use crate::error::{Error, Result};

fn conv(
    filter: usize,
    in_channels: usize,
    num_filters: usize,
    stride: usize,
    padding: usize,
) -> LayerSpec {
    LayerSpec::Conv {
        filter_h: filter,
        filter_w: filter,
        in_channels,
        num_filters,
        stride,
        padding,
    }
}

fn pool() -> LayerSpec {
    LayerSpec::MaxPool {
        window_h: 3,
        window_w: 3,
        stride: 2,
    }
}

fn dense(in_features: usize, out_features: usize) -> LayerSpec {
    LayerSpec::Dense {
        in_features,
        out_features,
    }
}

fn classifier_stage(in_features: usize, num_classes: usize) -> Vec<LayerSpec> {
    vec![
        dense(in_features, num_classes),
        LayerSpec::Softmax,
        LayerSpec::Classification,
    ]
}

/// 24 layers in 8 stages; 227x227x3 -> 6x6x256 -> 4096 -> 4096 -> classes.
pub fn paper24_spec(num_classes: usize) -> NetworkSpec {
    NetworkSpec {
        name: "paper-24".into(),
        input_shape: [227, 227, 3],
        stages: vec![
            vec![conv(11, 3, 96, 4, 0), LayerSpec::Relu, LayerSpec::lrn_default(), pool()],
            vec![conv(5, 96, 256, 1, 2), LayerSpec::Relu, LayerSpec::lrn_default(), pool()],
            vec![conv(3, 256, 384, 1, 1), LayerSpec::Relu],
            vec![conv(3, 384, 384, 1, 1), LayerSpec::Relu],
            vec![conv(3, 384, 256, 1, 1), LayerSpec::Relu, pool()],
            vec![dense(6 * 6 * 256, 4096), LayerSpec::Relu, LayerSpec::Dropout { rate: 0.5 }],
            vec![dense(4096, 4096), LayerSpec::Relu, LayerSpec::Dropout { rate: 0.5 }],
            classifier_stage(4096, num_classes),
        ],
        num_classes,
    }
}

/// Stages 1, 2, and the classifier stage of `paper-24`: the scratch-trained
/// baseline.
pub fn local_cnn_spec(num_classes: usize) -> NetworkSpec {
    NetworkSpec {
        name: "local-cnn".into(),
        input_shape: [227, 227, 3],
        stages: vec![
            vec![conv(11, 3, 96, 4, 0), LayerSpec::Relu, LayerSpec::lrn_default(), pool()],
            vec![conv(5, 96, 256, 1, 2), LayerSpec::Relu, LayerSpec::lrn_default(), pool()],
            classifier_stage(13 * 13 * 256, num_classes),
        ],
        num_classes,
    }
}

/// Desk-scale network with the same stage pattern as `paper-24`:
/// 32x32x3 -> conv 5x5x8 -> conv 3x3x16 -> conv 3x3x32 -> dense 64 -> classes.
pub fn mini_spec(num_classes: usize) -> NetworkSpec {
    NetworkSpec {
        name: "mini".into(),
        input_shape: [32, 32, 3],
        stages: vec![
            vec![conv(5, 3, 8, 1, 2), LayerSpec::Relu, LayerSpec::lrn_default(), pool()],
            vec![conv(3, 8, 16, 1, 1), LayerSpec::Relu, LayerSpec::lrn_default(), pool()],
            vec![conv(3, 16, 32, 1, 1), LayerSpec::Relu, pool()],
            vec![dense(3 * 3 * 32, 64), LayerSpec::Relu, LayerSpec::Dropout { rate: 0.5 }],
            classifier_stage(64, num_classes),
        ],
        num_classes,
    }
}

/// Stages 1, 2, and the classifier stage of `mini`.
pub fn mini_local_spec(num_classes: usize) -> NetworkSpec {
    NetworkSpec {
        name: "mini-local".into(),
        input_shape: [32, 32, 3],
        stages: vec![
            vec![conv(5, 3, 8, 1, 2), LayerSpec::Relu, LayerSpec::lrn_default(), pool()],
            vec![conv(3, 8, 16, 1, 1), LayerSpec::Relu, LayerSpec::lrn_default(), pool()],
            classifier_stage(7 * 7 * 16, num_classes),
        ],
        num_classes,
    }
}

pub fn spec_by_name(name: &str, num_classes: usize) -> Result<NetworkSpec> {
    match name {
        "paper-24" => Ok(paper24_spec(num_classes)),
        "local-cnn" => Ok(local_cnn_spec(num_classes)),
        "mini" => Ok(mini_spec(num_classes)),
        "mini-local" => Ok(mini_local_spec(num_classes)),
        other => Err(Error::Config(format!(
            "unknown architecture '{other}' (expected paper-24, local-cnn, mini, or mini-local)"
        ))),
    }
}

/// The local-baseline counterpart for a given architecture name.
pub fn local_variant(name: &str) -> Result<&'static str> {
    match name {
        "paper-24" => Ok("local-cnn"),
        "mini" => Ok("mini-local"),
        other => Err(Error::Config(format!(
            "no local baseline defined for architecture '{other}'"
        ))),
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn all_registry_specs_compose() {
        for name in ["paper-24", "local-cnn", "mini", "mini-local"] {
            let spec = spec_by_name(name, 9).unwrap();
            spec.shape_walk()
                .unwrap_or_else(|e| panic!("{name} does not compose: {e}"));
        }
    }

    #[test]
    fn paper24_has_24_layers_in_8_stages() {
        let spec = paper24_spec(9);
        assert_eq!(spec.stages.len(), 8);
        assert_eq!(spec.total_layers(), 24);
        assert_eq!(spec.default_transfer_layers(), 21);
    }

    #[test]
    fn local_cnn_matches_stages_1_2_8() {
        let full = paper24_spec(9);
        let local = local_cnn_spec(9);
        assert_eq!(local.stages.len(), 3);
        assert_eq!(local.stages[0], full.stages[0]);
        assert_eq!(local.stages[1], full.stages[1]);
        // classifier stage keeps softmax/classification but adapts in_features
        assert_eq!(local.stages[2].len(), 3);
        assert_eq!(local.total_layers(), 11);
    }

    #[test]
    fn unknown_name_is_error() {
        assert!(spec_by_name("resnet", 9).is_err());
    }
}
