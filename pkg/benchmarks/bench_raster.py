"""Compare the compiled and numpy triangle-fill backends.

    python benchmarks/bench_raster.py [--frames 40] [--repeat 3]

Renders the shipped swing fixture end to end (projection, shading, fill and
compositing) with each backend, checks the images agree bit for bit, and
prints per-frame timings.
"""
import argparse
import statistics
import sys
import time

from scene2virt import _kernels, fixtures
from scene2virt.analysis import associate_tracks, attach_poses, ingest_detections
from scene2virt.description import build_graph
from scene2virt.ontology import load_ontology
from scene2virt.selector import Request
from scene2virt.synthesis import plan_scene, render_frames


def _read(name):
    with open(fixtures.data_path(name), encoding="utf-8") as fh:
        return fh.read()


def swing_plan(n_frames):
    tracks = associate_tracks(ingest_detections(_read("swing_detections.json")))
    posed = attach_poses(tracks, _read("swing_poses.json"))
    graph = build_graph(posed, load_ontology(_read("poc_ontology.json")))
    plan = plan_scene(graph, Request(output_kind="overlay_frames"))
    order = plan.output_order[:n_frames]
    return type(plan)(plan.frames, plan.mode, plan.camera, order, plan.warnings), graph


def time_backend(plan, graph, background, backend, repeat):
    runs = []
    images = None
    for _ in range(repeat):
        start = time.perf_counter()
        images = render_frames(plan, graph, background, backend=backend)
        runs.append(time.perf_counter() - start)
    return min(runs), statistics.median(runs), images


def main(argv=None):
    p = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    p.add_argument("--frames", type=int, default=40)
    p.add_argument("--repeat", type=int, default=3)
    args = p.parse_args(argv)

    plan, graph = swing_plan(args.frames)
    background = fixtures.background_image()
    n = len(plan.output_order)
    results = {}
    for backend in sorted(_kernels.BACKENDS):
        best, median, images = time_backend(plan, graph, background, backend, args.repeat)
        results[backend] = (best, median, images)
        print(f"{backend:>9}: best {1000 * best / n:8.2f} ms/frame, median {1000 * median / n:8.2f} ms/frame ({n} frames)")
    if "compiled" not in results:
        print("compiled extension not built; only the numpy backend was timed")
        return 0
    same = all(a.image.same_pixels(b.image) for a, b in zip(results["pure"][2], results["compiled"][2]))
    print(f"speedup: {results['pure'][0] / results['compiled'][0]:.1f}x, images identical: {same}")
    return 0 if same else 1


if __name__ == "__main__":
    sys.exit(main())
