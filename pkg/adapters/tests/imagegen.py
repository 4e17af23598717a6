import numpy as np
from PIL import Image, ImageDraw


def draw_stair_image(width=640, height=480, region=(120, 140, 520, 360),
                     stripes=6, noise_seed=None):
    """Flat-grey frame with dark horizontal stripes inside the region,
    mimicking the nosing-edge stack of a photographed staircase."""
    image = Image.new("RGB", (width, height), (200, 200, 200))
    draw = ImageDraw.Draw(image)
    x0, y0, x1, y1 = region
    rows = np.linspace(y0, y1, stripes).round().astype(int)
    for v in rows:
        draw.line([(x0, int(v)), (x1, int(v))], fill=(30, 30, 30), width=3)
    if noise_seed is not None:
        rng = np.random.default_rng(noise_seed)
        arr = np.asarray(image, dtype=float)
        arr = np.clip(arr + rng.normal(0, 4.0, arr.shape), 0, 255)
        image = Image.fromarray(arr.astype(np.uint8))
    return image, [int(v) for v in rows]
