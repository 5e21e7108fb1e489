"""SVG exports for ROC curves, t-SNE scatters and attention distances.

matplotlib is imported lazily so the numeric pipeline never pays for it.
"""


def _pyplot():
    import matplotlib

    matplotlib.use("Agg")
    import matplotlib.pyplot as plt

    return plt


def roc_svg(roc, path, title="ROC"):
    plt = _pyplot()
    fig, ax = plt.subplots(figsize=(5, 5))
    ax.plot(roc.fpr, roc.tpr, lw=1.5)
    ax.plot([0, 1], [0, 1], ls="--", lw=0.8, color="gray")
    ax.set_xlabel("false positive rate")
    ax.set_ylabel("true positive rate")
    ax.set_title(f"{title} (AUC={roc.auc:.4f})")
    fig.savefig(str(path), format="svg", bbox_inches="tight")
    plt.close(fig)


def tsne_svg(coords, groups, path, title="t-SNE embedding"):
    """2D scatter colored by group label (machine type or fault flag)."""
    plt = _pyplot()
    fig, ax = plt.subplots(figsize=(6, 6))
    for group in sorted(set(groups)):
        idx = [i for i, g in enumerate(groups) if g == group]
        ax.scatter(coords[idx, 0], coords[idx, 1], s=10, label=str(group), alpha=0.7)
    ax.legend(fontsize=8)
    ax.set_title(title)
    fig.savefig(str(path), format="svg", bbox_inches="tight")
    plt.close(fig)


def attention_distance_svg(rows, path, title="Mean attention distance"):
    """rows: iterable of (layer, head, distance_px); scatter distance vs layer."""
    plt = _pyplot()
    fig, ax = plt.subplots(figsize=(6, 4))
    layers = [r[0] for r in rows]
    dists = [r[2] for r in rows]
    ax.scatter(layers, dists, s=14, alpha=0.7)
    ax.set_xlabel("layer")
    ax.set_ylabel("mean attention distance (px)")
    ax.set_title(title)
    fig.savefig(str(path), format="svg", bbox_inches="tight")
    plt.close(fig)
