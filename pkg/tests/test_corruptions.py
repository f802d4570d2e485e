import numpy as np
import pytest
from scipy import ndimage

from wavefuse.corruptions import (
    BOX_KINDS,
    IMAGE_KINDS,
    KINDS,
    LIDAR_KINDS,
    SEVERITY_TABLE,
    CorruptionSpec,
    corrupt_image,
    corrupt_lidar,
    cutout_spheres,
    severity_params,
)
from wavefuse.errors import InputError, KindError
from wavefuse.geometry import Box3D
from wavefuse.kitti import RawPointCloud
from wavefuse.numeric import philox

from oracles import psnr

PERTURB_KINDS = ("gauss_lidar", "uniform_lidar", "impulse_lidar", "crosstalk", "compensation",
                 "local_gauss", "local_uniform", "local_impulse", "moving_object")
REMOVE_KINDS = ("density", "cutout", "fov_lost", "local_density", "local_cutout")


def textured_image(seed=0, h=48, w=64):
    rng = philox(seed)
    return np.clip(ndimage.gaussian_filter(rng.uniform(0, 255, (h, w, 3)), (2, 2, 0)) * 1.5 - 60, 0, 255)


def scene_cloud(seed=0, n=3000):
    rng = philox(seed)
    boxes = [Box3D(10, 2, -0.9, 3.9, 1.6, 1.56, 0.3), Box3D(20, -4, -0.9, 3.9, 1.6, 1.56, -1.0)]
    inside = [b.center + (rng.random((400, 3)) - 0.5) * [b.l * 0.9, b.w * 0.9, b.h * 0.9] for b in boxes]
    # rotate the local offsets into each box frame
    pts = []
    for b, p in zip(boxes, inside):
        c, s = np.cos(b.yaw), np.sin(b.yaw)
        d = p - b.center
        pts.append(b.center + np.c_[c * d[:, 0] - s * d[:, 1], s * d[:, 0] + c * d[:, 1], d[:, 2]])
    bg = np.c_[rng.uniform(-30, 30, (n - 800, 2)), rng.uniform(-2, 1, n - 800)]
    xyz = np.vstack(pts + [bg])
    return RawPointCloud(np.c_[xyz, rng.random(len(xyz))]), boxes


def lidar_distortion(a: RawPointCloud, b: RawPointCloud) -> float:
    return float(np.mean(np.linalg.norm(a.xyz - b.xyz, axis=1)))


class TestSpec:
    def test_parse_round_trip(self):
        spec = CorruptionSpec.parse("fog:3:42")
        assert spec == CorruptionSpec("fog", 3, 42)
        assert str(spec) == "fog:3:42"

    @pytest.mark.parametrize("text", ["fog:6:1", "blizzard:1:1", "fog:1", "fog:x:1", "fog:1:-1"])
    def test_parse_rejects(self, text):
        with pytest.raises(InputError):
            CorruptionSpec.parse(text)

    def test_kind_set(self):
        assert len(KINDS) == 23
        assert set(IMAGE_KINDS) | set(LIDAR_KINDS) | {"none"} == set(KINDS)
        assert set(SEVERITY_TABLE) == set(KINDS) - {"none"}

    def test_table_rows(self):
        assert [severity_params("gauss_img", s)["sigma"] for s in range(1, 6)] == [0.04, 0.06, 0.08, 0.10, 0.12]
        assert [severity_params("density", s)["drop_fraction"] for s in range(1, 6)] == [0.1, 0.2, 0.3, 0.4, 0.5]
        assert [severity_params("motion_blur", s)["kernel_length"] for s in range(1, 6)] == [3, 5, 7, 9, 11]

    def test_table_monotone(self):
        for kind, table in SEVERITY_TABLE.items():
            for name, vals in table.items():
                diffs = np.diff(vals)
                assert np.all(diffs >= 0) or np.all(diffs <= 0), (kind, name)

    def test_bad_severity(self):
        with pytest.raises(InputError):
            severity_params("fog", 0)
        with pytest.raises(InputError):
            severity_params("hail", 1)


class TestImage:
    def test_none_identity(self):
        img = textured_image()
        out = corrupt_image(img, CorruptionSpec())
        np.testing.assert_array_equal(out, img)
        assert out is not img

    @pytest.mark.parametrize("kind", IMAGE_KINDS)
    def test_deterministic_and_clipped(self, kind):
        img = textured_image(1)
        for sev in (1, 5):
            a = corrupt_image(img, CorruptionSpec(kind, sev, 9))
            b = corrupt_image(img, CorruptionSpec(kind, sev, 9))
            np.testing.assert_array_equal(a, b)
            assert a.shape == img.shape
            assert a.min() >= 0 and a.max() <= 255

    def test_lidar_kind_rejected(self):
        with pytest.raises(KindError):
            corrupt_image(textured_image(), CorruptionSpec("density", 1, 0))

    def test_gauss_psnr_strictly_decreasing(self):
        img = textured_image(2)
        means = [np.mean([psnr(corrupt_image(img, CorruptionSpec("gauss_img", s, seed)), img) for seed in range(20)])
                 for s in range(1, 6)]
        assert np.all(np.diff(means) < 0)

    @pytest.mark.parametrize("kind", IMAGE_KINDS)
    def test_severity_monotone(self, kind):
        img = textured_image(3)
        dist = [np.mean([np.linalg.norm(corrupt_image(img, CorruptionSpec(kind, s, seed)) - img)
                         for seed in range(20)]) for s in range(1, 6)]
        assert np.all(np.diff(dist) >= 0), dist

    def test_fog_formula(self):
        img = textured_image(4)
        t = severity_params("fog", 2)["transmittance"]
        out = corrupt_image(img, CorruptionSpec("fog", 2, 0))
        np.testing.assert_allclose(out, img * t + 255 * (1 - t), atol=1e-12)

    def test_fog_depth_weighted(self):
        img = np.full((4, 4, 3), 100.0)
        depth = np.zeros((4, 4))
        depth[0, 0], depth[3, 3] = 5.0, 50.0
        out = corrupt_image(img, CorruptionSpec("fog", 3, 0), depth=depth)
        assert out[0, 0, 0] < out[3, 3, 0]
        assert out[1, 1, 0] == out[3, 3, 0]  # unknown depth treated as the farthest seen

    def test_seed_matters(self):
        img = textured_image(5)
        a = corrupt_image(img, CorruptionSpec("snow", 3, 1))
        b = corrupt_image(img, CorruptionSpec("snow", 3, 2))
        assert not np.array_equal(a, b)


class TestLidar:
    def test_none_identity(self):
        cloud, _ = scene_cloud()
        np.testing.assert_array_equal(corrupt_lidar(cloud, CorruptionSpec()).points, cloud.points)

    @pytest.mark.parametrize("kind", LIDAR_KINDS)
    def test_deterministic(self, kind):
        cloud, boxes = scene_cloud(1)
        spec = CorruptionSpec(kind, 4, 17)
        a = corrupt_lidar(cloud, spec, boxes).points
        b = corrupt_lidar(cloud, spec, boxes).points
        np.testing.assert_array_equal(a, b)
        assert a.tobytes() == b.tobytes()

    @pytest.mark.parametrize("kind", PERTURB_KINDS)
    def test_perturbations_preserve_count(self, kind):
        cloud, boxes = scene_cloud(2)
        assert len(corrupt_lidar(cloud, CorruptionSpec(kind, 5, 3), boxes)) == len(cloud)

    @pytest.mark.parametrize("kind", REMOVE_KINDS)
    def test_removals_never_grow(self, kind):
        cloud, boxes = scene_cloud(3)
        for s in range(1, 6):
            assert len(corrupt_lidar(cloud, CorruptionSpec(kind, s, 4), boxes)) <= len(cloud)

    def test_density_exact_count(self):
        cloud = RawPointCloud(philox(5).normal(size=(1000, 4)))
        assert len(corrupt_lidar(cloud, CorruptionSpec("density", 5, 0))) == 500
        for s, keep in zip(range(1, 6), (900, 800, 700, 600, 500)):
            assert len(corrupt_lidar(cloud, CorruptionSpec("density", s, 7))) == keep

    def test_density_keeps_order(self):
        cloud = RawPointCloud(np.c_[np.arange(100.0), np.zeros((100, 3))])
        kept = corrupt_lidar(cloud, CorruptionSpec("density", 3, 0)).points[:, 0]
        assert np.all(np.diff(kept) > 0)

    def test_cutout_containment(self):
        cloud, _ = scene_cloud(6)
        for seed in range(10):
            spec = CorruptionSpec("cutout", 5, seed)
            centers, radius = cutout_spheres(cloud, spec)
            out = corrupt_lidar(cloud, spec)
            for c in centers:
                assert np.all(np.linalg.norm(out.xyz - c, axis=1) > radius)
            # nothing outside the spheres was removed
            outside = np.all(np.linalg.norm(cloud.xyz[:, None] - centers[None], axis=2) > radius, axis=1)
            assert len(out) == int(outside.sum())

    def test_fov_window(self):
        cloud, _ = scene_cloud(7)
        out = corrupt_lidar(cloud, CorruptionSpec("fov_lost", 5, 0))
        az = np.degrees(np.abs(np.arctan2(out.xyz[:, 1], out.xyz[:, 0])))
        assert az.max() <= 30.0 + 1e-9

    def test_local_kinds_need_boxes(self):
        cloud, _ = scene_cloud(8)
        for kind in BOX_KINDS:
            with pytest.raises(InputError):
                corrupt_lidar(cloud, CorruptionSpec(kind, 1, 0))

    @pytest.mark.parametrize("kind", ("local_gauss", "local_uniform", "local_impulse", "moving_object"))
    def test_local_only_touches_boxes(self, kind):
        cloud, boxes = scene_cloud(9)
        out = corrupt_lidar(cloud, CorruptionSpec(kind, 5, 1), boxes)
        inside = np.zeros(len(cloud), dtype=bool)
        for b in boxes:
            inside |= b.contains(cloud.xyz)
        np.testing.assert_array_equal(out.points[~inside], cloud.points[~inside])
        assert not np.array_equal(out.points[inside], cloud.points[inside])

    def test_local_removals_only_in_boxes(self):
        cloud, boxes = scene_cloud(10)
        inside = np.zeros(len(cloud), dtype=bool)
        for b in boxes:
            inside |= b.contains(cloud.xyz)
        for kind in ("local_density", "local_cutout"):
            out = corrupt_lidar(cloud, CorruptionSpec(kind, 5, 2), boxes)
            assert len(out) < len(cloud)
            assert len(cloud) - len(out) <= inside.sum()
            # every outside point survives
            kept = {tuple(p) for p in out.points}
            assert all(tuple(p) in kept for p in cloud.points[~inside])

    def test_moving_object_displacement(self):
        cloud, boxes = scene_cloud(11)
        out = corrupt_lidar(cloud, CorruptionSpec("moving_object", 5, 0), boxes)
        m = boxes[0].contains(cloud.xyz)
        shift = out.xyz[m] - cloud.xyz[m]
        np.testing.assert_allclose(shift[:, :2], np.tile([np.cos(0.3), np.sin(0.3)], (m.sum(), 1)), atol=1e-12)

    def test_image_kind_rejected(self):
        cloud, _ = scene_cloud()
        with pytest.raises(KindError):
            corrupt_lidar(cloud, CorruptionSpec("fog", 1, 0))

    @pytest.mark.parametrize("kind", PERTURB_KINDS)
    def test_severity_monotone_distortion(self, kind):
        cloud, boxes = scene_cloud(12)
        dist = [np.mean([lidar_distortion(corrupt_lidar(cloud, CorruptionSpec(kind, s, seed), boxes), cloud)
                         for seed in range(20)]) for s in range(1, 6)]
        assert np.all(np.diff(dist) >= 0), dist

    @pytest.mark.parametrize("kind", REMOVE_KINDS)
    def test_severity_monotone_removal(self, kind):
        cloud, boxes = scene_cloud(13)
        removed = [np.mean([len(cloud) - len(corrupt_lidar(cloud, CorruptionSpec(kind, s, seed), boxes))
                            for seed in range(20)]) for s in range(1, 6)]
        assert np.all(np.diff(removed) >= 0), removed
