"""Map overlays: category-coded markers with false-positive / false-negative
annotations, written as PNG."""

import os
import tempfile

import numpy as np
from PIL import Image, ImageDraw

from gridnav.evalkit.metrics import match_points
from gridnav.gridworld import CellState, Category, world_to_cell

_CAT_COLOR = {Category.CLOSED_ROOM: (0, 160, 0),
              Category.OPEN_ROOM: (30, 80, 255),
              Category.CORRIDOR: (150, 40, 200)}

_FP_COLOR = (220, 0, 0)
_FN_COLOR = (240, 140, 0)


def _base_image(grid):
    img = np.full(grid.cells.shape, 160, dtype=np.uint8)
    img[grid.cells == CellState.FREE] = 255
    img[grid.cells == CellState.OCCUPIED] = 0
    return Image.fromarray(img).convert("RGB")


def _marker(draw, category, x, y, r=4):
    color = _CAT_COLOR[category]
    if category is Category.CLOSED_ROOM:
        draw.rectangle([x - r, y - r, x + r, y + r], outline=color, width=2)
    elif category is Category.OPEN_ROOM:
        draw.ellipse([x - r, y - r, x + r, y + r], outline=color, width=2)
    else:
        draw.polygon([(x, y - r), (x - r, y + r), (x + r, y + r)],
                     outline=color)


def _cross(draw, x, y, r=5):
    draw.line([x - r, y - r, x + r, y + r], fill=_FP_COLOR, width=2)
    draw.line([x - r, y + r, x + r, y - r], fill=_FP_COLOR, width=2)


def _circle(draw, x, y, r=6):
    draw.ellipse([x - r, y - r, x + r, y + r], outline=_FN_COLOR, width=2)


def render_overlay(grid, features, truths, out_path, radius=0.5):
    """Draw predicted features over the map raster; unmatched predictions get
    a cross, unmatched ground truths a circle.

    ``features`` and ``truths`` are (category, world_xy) sequences; matching
    follows the evaluation rule (category-strict, greedy within radius).
    """
    img = _base_image(grid)
    draw = ImageDraw.Draw(img)
    pairs, fp, fn = match_points(list(features), list(truths), radius)

    for cat, xy in features:
        c, r = world_to_cell(grid, xy)
        _marker(draw, Category(cat), c, r)
    for i in fp:
        cat, xy = features[i]
        c, r = world_to_cell(grid, xy)
        _cross(draw, c, r)
    for j in fn:
        cat, xy = truths[j]
        c, r = world_to_cell(grid, xy)
        _circle(draw, c, r)

    directory = os.path.dirname(os.path.abspath(out_path)) or "."
    fd, tmp = tempfile.mkstemp(suffix=".png", dir=directory)
    os.close(fd)
    try:
        img.save(tmp, format="PNG")
        os.replace(tmp, out_path)
    except BaseException:
        if os.path.exists(tmp):
            os.unlink(tmp)
        raise
    return out_path
