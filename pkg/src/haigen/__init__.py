"""HAIGEN-style desk-scale fashion design pipeline.

Subpackages:
    diffusion   -- noise schedules, forward process, DDIM stepping
    t2im        -- latent-diffusion fine-tuning machinery (LoRA, control branch)
    sketch      -- designer-style image-to-sketch generation
    recommend   -- embedding index and top-k sketch retrieval
    transfer    -- dual-conditioned DDIM sketch coloring
    metrics     -- PSNR / SSIM / MSE / LPIPS / FID
    service     -- cloud/local orchestration, artifact store, CLI
"""

__version__ = "0.1.0"
