"""Grouped bar chart of the with/without-filter comparison, drawn with PIL."""

from __future__ import annotations

from PIL import Image, ImageDraw

COLORS = {"with_filter": (46, 110, 180), "without_filter": (200, 80, 60)}
PANELS = (("err", "ERR"), ("fnr", "FNR"), ("fpr", "FPR"))


def comparison_chart(runs, group_size, path, panel_size=(360, 240)) -> None:
    """One panel per rate, two bars (with / without filtering) per group."""
    pw, ph = panel_size
    margin = 30
    img = Image.new("RGB", (pw * len(PANELS), ph + 20), "white")
    draw = ImageDraw.Draw(img)
    groups = {k: v.groups(group_size) for k, v in runs.items()}
    n = max(len(g) for g in groups.values())
    for p, (attr, title) in enumerate(PANELS):
        x0 = p * pw + margin
        x1 = (p + 1) * pw - 10
        y0, y1 = 20, ph - margin
        values = [getattr(g.micro, attr) or 0.0 for gs in groups.values() for g in gs]
        top = max(values + [1e-9])
        draw.text((x0, 4), f"{title} (max {top:.3f})", fill="black")
        draw.line([(x0, y0), (x0, y1), (x1, y1)], fill="black")
        slot = (x1 - x0) / max(n, 1)
        bar = slot / (len(groups) + 1)
        for gi in range(n):
            for vi, (label, gs) in enumerate(groups.items()):
                if gi >= len(gs):
                    continue
                v = getattr(gs[gi].micro, attr) or 0.0
                left = x0 + gi * slot + (vi + 0.5) * bar
                height = (y1 - y0) * v / top
                draw.rectangle([left, y1 - height, left + bar - 1, y1],
                               fill=COLORS.get(label, (120, 120, 120)))
            draw.text((x0 + gi * slot + slot / 3, y1 + 4), str(gi + 1), fill="black")
    legend_y = ph + 4
    for vi, label in enumerate(groups):
        lx = 10 + vi * 160
        draw.rectangle([lx, legend_y, lx + 10, legend_y + 10], fill=COLORS.get(label, (120, 120, 120)))
        draw.text((lx + 14, legend_y), label.replace("_", " "), fill="black")
    img.save(path, format="PNG")
