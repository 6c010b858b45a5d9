"""Reference 8x8 DCT perceptual hash for the block-pattern test image.

Image: 64x64, 8x8 blocks, block colors drawn from SplitMix64(42) in
row-major block order (r, g, b = next() % 256 each). The brightened
variant scales every channel by 1.05, rounds half away from zero and
clamps to 255.
"""
import numpy as np
from scipy.fft import dctn

from splitmix import SplitMix64


def block_image():
    rng = SplitMix64(42)
    img = np.zeros((64, 64, 3), dtype=np.float64)
    for by in range(8):
        for bx in range(8):
            c = [rng.next() % 256 for _ in range(3)]
            img[by * 8:(by + 1) * 8, bx * 8:(bx + 1) * 8, :] = c
    return img


def brighten(img, factor):
    return np.minimum(255.0, np.floor(img * factor + 0.5))


def phash(img):
    gray = 0.299 * img[:, :, 0] + 0.587 * img[:, :, 1] + 0.114 * img[:, :, 2]
    h, w = gray.shape
    small = gray.reshape(32, h // 32, 32, w // 32).mean(axis=(1, 3))
    coeffs = dctn(small, type=2, norm="ortho")[:8, :8].flatten()
    med = np.median(coeffs)
    bits = 0
    for i, c in enumerate(coeffs):
        if c > med:
            bits |= 1 << i
    return bits


if __name__ == "__main__":
    base = block_image()
    h0 = phash(base)
    h1 = phash(brighten(base, 1.05))
    print(f"base   = 0x{h0:016x}")
    print(f"bright = 0x{h1:016x}")
    print(f"hamming = {bin(h0 ^ h1).count('1')}")
