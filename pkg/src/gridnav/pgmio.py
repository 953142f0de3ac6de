"""Binary PGM (P5) reading and writing."""

import numpy as np

from gridnav.util import atomic_write


class PgmError(ValueError):
    pass


def load_pgm(path):
    """Read an 8-bit binary PGM into a uint8 array (row 0 = top of image)."""
    with open(path, "rb") as f:
        data = f.read()
    if not data.startswith(b"P5"):
        raise PgmError(f"{path}: not a binary PGM (missing P5 magic)")

    # Header tokens: magic, width, height, maxval; '#' comments run to EOL.
    tokens = []
    pos = 2
    while len(tokens) < 3:
        while pos < len(data) and data[pos:pos + 1].isspace():
            pos += 1
        if pos < len(data) and data[pos:pos + 1] == b"#":
            eol = data.find(b"\n", pos)
            if eol < 0:
                raise PgmError(f"{path}: truncated header comment")
            pos = eol + 1
            continue
        start = pos
        while pos < len(data) and not data[pos:pos + 1].isspace():
            pos += 1
        if start == pos:
            raise PgmError(f"{path}: truncated PGM header")
        tokens.append(data[start:pos])
    pos += 1  # single whitespace byte after maxval

    try:
        width, height, maxval = (int(t) for t in tokens)
    except ValueError:
        raise PgmError(f"{path}: non-numeric PGM header field") from None
    if width < 1 or height < 1:
        raise PgmError(f"{path}: bad dimensions {width}x{height}")
    if not 0 < maxval <= 255:
        raise PgmError(f"{path}: only 8-bit PGM supported (maxval {maxval})")

    payload = data[pos:pos + width * height]
    if len(payload) < width * height:
        raise PgmError(f"{path}: pixel payload truncated")
    return np.frombuffer(payload, dtype=np.uint8).reshape(height, width).copy()


def pgm_bytes(image):
    image = np.ascontiguousarray(image, dtype=np.uint8)
    h, w = image.shape
    return b"P5\n%d %d\n255\n" % (w, h) + image.tobytes()


def save_pgm(path, image):
    atomic_write(path, pgm_bytes(image))
