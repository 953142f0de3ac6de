"""Small shared helpers."""

import os
import tempfile


def atomic_write(path, data):
    """Write bytes or text to ``path`` via a temp file and rename, so readers
    never observe a partial file."""
    mode = "wb" if isinstance(data, (bytes, bytearray)) else "w"
    directory = os.path.dirname(os.path.abspath(path)) or "."
    fd, tmp = tempfile.mkstemp(dir=directory)
    try:
        with os.fdopen(fd, mode) as f:
            f.write(data)
        os.replace(tmp, path)
    except BaseException:
        if os.path.exists(tmp):
            os.unlink(tmp)
        raise
