from .cameras import CameraManifest, load_manifest, save_manifest
from .images import box_downsample, read_png, write_png
from .metrics import PSNR_CAP, capped, psnr, ssim
from .ply import load_ply, parse_ply, ply_bytes, write_ply

__all__ = [
    "CameraManifest", "load_manifest", "save_manifest",
    "box_downsample", "read_png", "write_png",
    "PSNR_CAP", "capped", "psnr", "ssim",
    "load_ply", "parse_ply", "ply_bytes", "write_ply",
]
