//! Reconstruction and forecasting networks with their training loop and
//! evaluation protocol.

mod forecast;
mod inpaint;
mod train;

pub use forecast::{convlstm_cell_step, ConvLstmConfig, ConvLstmNet, DeepONet, DeepONetConfig, Forecaster, ForecasterKind, LstmConfig, LstmNet};
pub use inpaint::{masked_mse, InpaintConfig, InpaintData, InpaintNet};
pub use train::{
    evaluate_inpaint, evaluate_one_step, split_loss, train, ForecastEval, InpaintEval, LossCurves, Model, TrainConfig, TrainOutcome, WindowClip,
};

use crate::autodiff::AutodiffError;
use crate::dataprep::DataError;

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum ModelError {
    #[error(transparent)]
    Autodiff(#[from] AutodiffError),
    #[error(transparent)]
    Data(#[from] DataError),
    #[error("loss mask selects no cells")]
    EmptyMask,
    #[error("non-finite loss at epoch {epoch}")]
    NonFiniteLoss { epoch: usize },
    #[error("the {0} split is empty")]
    EmptySplit(&'static str),
}
