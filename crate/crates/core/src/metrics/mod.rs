//! Reconstruction metrics (MSE, SSIM, Recon-Acc) and recognition metrics
//! (distance matrix, CMC, ROC and EER).

mod recog;
mod recon;

pub use recog::{
    cmc, cmc_csv, eer, parse_cmc_csv, parse_roc_csv, rank_k, roc, roc_csv, roc_from_scores, score_matrix, CmcCurve,
    RocCurve, RocPoint, ScoreMatrix,
};
pub use recon::{
    gaussian_window, mean_std, mse, mse_image, recon_acc, recon_acc_image, ssim, ssim_plane, RECON_ACC_THRESHOLD,
    SSIM_K1, SSIM_K2, SSIM_SIGMA, SSIM_WINDOW,
};
