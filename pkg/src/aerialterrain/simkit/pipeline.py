"""In-memory closed-loop runs: scene -> traverse -> labels -> frames -> patch records."""

import logging
from dataclasses import dataclass, field

import numpy as np

from .. import dataset, signals
from ..dataset import ExtractionConfig
from .render import default_calibration, simulate_aerial_frames, simulate_fpv_frames
from .traverse import simulate_traverse

log = logging.getLogger(__name__)


def labels_from_bundle(bundle, spec=signals.WindowSpec(), cfg=signals.WelchConfig(), sigma=signals.DEFAULT_SIGMA):
    imu, pw = bundle.imu, bundle.power
    return signals.compute_labels(imu["t"], imu["az"], np.stack([imu["wx"], imu["wy"]], axis=1),
                                  pw["t"], pw["current"], pw["voltage"], spec, cfg, sigma)


def pois_from_bundle(bundle, spacing=0.3, threshold=0.1):
    traj = bundle.trajectory_obj()
    odo = bundle.odometry
    intervals = dataset.filter_straight_segments(odo["t"], odo["v_left"], odo["v_right"], threshold)
    return dataset.sample_pois(traj, intervals, spacing)


@dataclass
class SimulatedRun:
    scene: object
    bundle: object
    labels: object
    pois: list
    ugv_frames: list = field(default_factory=list)
    uav_frames: list = field(default_factory=list)
    calib: object = None

    @property
    def trajectory(self):
        return self.bundle.trajectory_obj()

    def records(self, config=ExtractionConfig()):
        return dataset.build_patch_records(self.pois, self.ugv_frames, self.uav_frames, self.calib, self.trajectory,
                                           dict(self.labels.items()), config, self.bundle.attitude_track(),
                                           self.scene.tag_at)


def simulate_run(scene, path, seed=0, speed=1.5, uav=True, ugv=True, uav_period=2.0, uav_size=16.0, uav_gsd=0.02,
                 ugv_period=0.5, occlusion=False, calib=None, spacing=0.3, noise_std=2.0):
    """Drive ``path`` over ``scene`` and render the requested viewpoints.

    ``occlusion`` makes aerial frames see the ground under occluder classes.
    Seeds for the traverse and each renderer are derived from ``seed``.
    """
    calib = calib or default_calibration()
    s_trav, s_uav, s_ugv = np.random.SeedSequence(seed).generate_state(3)
    bundle = simulate_traverse(scene, path, speed, seed=int(s_trav))
    labels = labels_from_bundle(bundle)
    pois = pois_from_bundle(bundle, spacing)
    traj = bundle.trajectory_obj()
    uav_frames = simulate_aerial_frames(scene, traj, uav_period, uav_size, uav_gsd, int(s_uav), occlusion,
                                        noise_std=noise_std) if uav else []
    ugv_frames = simulate_fpv_frames(scene, traj, bundle.attitude_track(), calib, ugv_period, seed=int(s_ugv),
                                     noise_std=noise_std) if ugv else []
    log.info("simulated %.1f s traverse: %d POIs, %d aerial and %d onboard frames",
             traj.t[-1], len(pois), len(uav_frames), len(ugv_frames))
    return SimulatedRun(scene, bundle, labels, pois, ugv_frames, uav_frames, calib)
