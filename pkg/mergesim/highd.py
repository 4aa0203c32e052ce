#!/usr/bin/env python
# coding: utf-8

import logging
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field, replace
from pathlib import Path

import numpy as np
import pandas as pd

from .behavior import InteractionValues
from .config import ModelConfig, worker_count
from .intent import ObservationHistory, belief_frame, run_filter
from .simulation import ScenarioConfig, VehicleSpec, Verdict, make_snapshot, run
from .world import DriverAction, RoadGeometry, VehicleState, step

""" This module reads and writes High-D shaped trajectory recordings,
extracts the merge episodes and replays recorded traffic against a virtual
ego vehicle.

Coordinates follow the road frame: x increases along the travel direction
and y increases leftward from the outer boundary of the ramp, so that a
vehicle centered in lane k has y = (k + 0.5) lane_width. Lane ids count the
lanes from the ramp, ramp_lane_id being the ramp. """

__author__ = "mergesim developers"

log = logging.getLogger(__name__)

TRACK_COLUMNS = ["frame", "id", "x", "y", "xVelocity", "yVelocity", "laneId"]
INTEGER_COLUMNS = ["frame", "id", "laneId"]
FRAME_RATE = 25.
RAMP_LANE_ID = 1

VERDICT_COLUMNS = ["recording_id", "vehicle_id", "verdict", "merge_time", "steps"]
SUMMARY_COLUMNS = ["scene", "merges", "successes", "collisions", "ramp_end_failures",
                   "timeouts", "success_rate"]

# lateral speed above which a vehicle is taken as changing lane, m/s
LATERAL_THRESHOLD = 0.1


class SchemaError(ValueError):
    """ Trajectory file that does not follow the track schema """


def _lines(index):
    # header is line 1
    return ", ".join(str(i + 2) for i in index[:10])


def validate_tracks(tracks):
    """ Check a track table and return it with normalized dtypes, sorted by
    vehicle then frame """
    missing = [c for c in TRACK_COLUMNS if c not in tracks.columns]
    if missing:
        raise SchemaError(f"missing columns: {', '.join(missing)}.")
    tracks = tracks[TRACK_COLUMNS].reset_index(drop=True)
    numeric = tracks.apply(pd.to_numeric, errors="coerce")

    bad = numeric.index[numeric.isna().any(axis=1)]
    if len(bad):
        raise SchemaError(f"missing or non-numeric values at lines {_lines(bad)}.")
    fractional = numeric.index[(numeric[INTEGER_COLUMNS] % 1 != 0).any(axis=1)]
    if len(fractional):
        raise SchemaError(f"frame, id and laneId must be integers at lines {_lines(fractional)}.")
    numeric[INTEGER_COLUMNS] = numeric[INTEGER_COLUMNS].astype("int64")
    floats = [c for c in TRACK_COLUMNS if c not in INTEGER_COLUMNS]
    numeric[floats] = numeric[floats].astype(float)

    duplicated = numeric.index[numeric.duplicated(["frame", "id"], keep="first")]
    if len(duplicated):
        raise SchemaError(f"duplicate (frame, id) rows at lines {_lines(duplicated)}.")

    # frames of a vehicle follow each other in file order, one by one
    gaps = numeric.groupby("id")["frame"].diff()
    broken = numeric.index[gaps.notna() & (gaps != 1)]
    if len(broken):
        raise SchemaError(
            f"frames must be contiguous and increasing per vehicle at lines {_lines(broken)}.")
    return numeric.sort_values(["id", "frame"], kind="stable").reset_index(drop=True)


@dataclass
class TrajectoryRecord:
    """ One recording: per-frame rows of every vehicle.

    Args:
        recording_id (str): name of the recording, the scene
        tracks (DataFrame): TRACK_COLUMNS rows
        frame_rate (float): frames per second
        ramp_lane_id (int): laneId of the on-ramp
    """
    recording_id: str
    tracks: pd.DataFrame
    frame_rate: float = FRAME_RATE
    ramp_lane_id: int = RAMP_LANE_ID

    def __post_init__(self):
        if not self.frame_rate > 0:
            raise ValueError(f"frame_rate must be positive. frame_rate = {self.frame_rate}.")
        self.tracks = validate_tracks(self.tracks)

    @property
    def vehicle_ids(self):
        return sorted(int(i) for i in self.tracks["id"].unique())

    def track(self, vehicle_id):
        rows = self.tracks[self.tracks["id"] == vehicle_id]
        if rows.empty:
            raise KeyError(f"unknown vehicle id {vehicle_id}.")
        return rows

    def lane_index(self, lane_id):
        return np.asarray(lane_id) - self.ramp_lane_id

    @property
    def ramp_vehicle_ids(self):
        """ vehicles whose first recorded lane is the ramp """
        first = self.tracks.sort_values("frame", kind="stable").groupby("id")["laneId"].first()
        return frozenset(int(i) for i in first.index[first == self.ramp_lane_id])


def load(path, recording_id=None, frame_rate=FRAME_RATE, ramp_lane_id=RAMP_LANE_ID):
    """ Read a High-D shaped CSV file, see TRACK_COLUMNS """
    path = Path(path)
    try:
        tracks = pd.read_csv(path)
    except pd.errors.EmptyDataError:
        raise SchemaError(f"{path} is empty.")
    record = TrajectoryRecord(recording_id or path.stem, tracks, frame_rate, ramp_lane_id)
    log.debug("%s: %d rows, %d vehicles", path, len(record.tracks), len(record.vehicle_ids))
    return record


def write(record, path):
    record.tracks[TRACK_COLUMNS].to_csv(path, index=False)


@dataclass(frozen=True)
class MergeEpisode:
    vehicle_id: int
    start_frame: int
    end_frame: int
    road: RoadGeometry

    @property
    def frames(self):
        return self.end_frame - self.start_frame + 1


def infer_road(record, lane_width=3.5, goal_margin=100., **overrides):
    """ Road geometry from the lane ids: the ramp spans the x range of the
    ramp lane rows, the goal lies goal_margin past the ramp end and every
    other lane id is a highway lane. Keyword arguments override the
    inferred values. """
    tracks = record.tracks
    ramp = tracks[tracks["laneId"] == record.ramp_lane_id]
    params = dict(lane_width=lane_width)
    if not ramp.empty:
        ramp_end = float(ramp["x"].max())
        params.update(ramp_start_x=float(ramp["x"].min()), ramp_end_x=ramp_end,
                      goal_x=ramp_end + goal_margin)
    params["lane_count"] = max(int(tracks["laneId"].nunique()) - 1, 1)
    params.update(overrides)
    return RoadGeometry(**params)


def extract_merge_episodes(record, road=None):
    """ One episode per vehicle starting on the ramp and ending on a
    highway lane """
    episodes = []
    for vehicle_id, track in record.tracks.groupby("id", sort=True):
        first, last = track.iloc[0], track.iloc[-1]
        if first["laneId"] == record.ramp_lane_id and last["laneId"] != record.ramp_lane_id:
            if road is None:
                road = infer_road(record)
            episodes.append(MergeEpisode(int(vehicle_id), int(first["frame"]),
                                         int(last["frame"]), road))
    log.info("%s: %d merge episodes", record.recording_id, len(episodes))
    return episodes


def epoch_frames(start_frame, end_frame, dt, frame_rate):
    """ frames of the decision epochs from start_frame """
    stride = int(round(dt * frame_rate))
    if stride < 1:
        raise ValueError(f"dt is shorter than a frame. dt = {dt}, frame_rate = {frame_rate}.")
    return list(range(start_frame, end_frame + 1, stride)), stride


class _Tracks:
    """ nearest-frame access to the tracks of a record """

    def __init__(self, record, tolerance):
        self.tolerance = tolerance
        self.data = {}
        for vehicle_id, track in record.tracks.groupby("id", sort=True):
            self.data[int(vehicle_id)] = (
                track["frame"].to_numpy(),
                track[["x", "y", "xVelocity"]].to_numpy(dtype=float),
            )

    def __iter__(self):
        return iter(self.data)

    def state(self, vehicle_id, frame):
        frames, values = self.data[vehicle_id]
        i = int(np.searchsorted(frames, frame))
        best = None
        for j in (i - 1, i):
            if 0 <= j < len(frames) and abs(frames[j] - frame) <= self.tolerance:
                if best is None or abs(frames[j] - frame) < abs(frames[best] - frame):
                    best = j
        if best is None:
            return None
        x, y, v_x = values[best]
        return VehicleState(x=float(x), y=float(y), v_x=float(v_x))

    def states(self, frame, exclude=()):
        states = {}
        for vehicle_id in self.data:
            if vehicle_id not in exclude:
                s = self.state(vehicle_id, frame)
                if s is not None:
                    states[vehicle_id] = s
        return states


def _check_span(record, episode):
    frames = record.tracks["frame"]
    if episode.start_frame < frames.min() or episode.end_frame > frames.max():
        raise ValueError(
            f"episode frames [{episode.start_frame}, {episode.end_frame}] exceed the record "
            f"[{frames.min()}, {frames.max()}].")
    if episode.end_frame < episode.start_frame:
        raise ValueError("episode ends before it starts.")


def replay_scenario(record, episode, model=None, seed=0):
    """ Scenario of a virtual ego started from the state of the merging
    vehicle, every other vehicle replayed at the decision epochs """
    model = model or ModelConfig.replay()
    _check_span(record, episode)
    dt = model.kinematics.dt
    frames, stride = epoch_frames(episode.start_frame, episode.end_frame, dt, record.frame_rate)
    tracks = _Tracks(record, stride // 2)

    ego = tracks.state(episode.vehicle_id, episode.start_frame)
    if ego is None:
        raise ValueError(f"vehicle {episode.vehicle_id} is absent at frame {episode.start_frame}.")
    vehicles = [VehicleSpec(episode.vehicle_id, ego, controller="planner", merging=True)]
    for vehicle_id in tracks:
        if vehicle_id == episode.vehicle_id:
            continue
        track = tuple(tracks.state(vehicle_id, f) for f in frames)
        if any(s is not None for s in track):
            vehicles.append(VehicleSpec(vehicle_id, controller="replay", track=track))

    simulation = replace(model.simulation, max_steps=max(len(frames) - 1, 1))
    model = replace(model, road=episode.road, simulation=simulation)
    return ScenarioConfig(vehicles=tuple(vehicles), model=model, seed=seed,
                          name=f"{record.recording_id}:{episode.vehicle_id}")


def replay_eval(record, episode, model=None, seed=0):
    """ Closed loop run of the virtual ego against the recorded traffic """
    return run(replay_scenario(record, episode, model, seed))


def evaluate_recording(record, model=None, seed=0, workers=None):
    """ Verdict table of every merge episode of a record. Episodes run on a
    thread pool capped by MERGESIM_THREADS. """
    episodes = extract_merge_episodes(record)
    workers = workers or worker_count()

    def evaluate(episode):
        outcome = replay_eval(record, episode, model, seed)
        log.info("%s vehicle %d: %s", record.recording_id, episode.vehicle_id,
                 outcome.verdict.value)
        return [record.recording_id, episode.vehicle_id, outcome.verdict.value,
                outcome.merge_time, outcome.steps]

    with ThreadPoolExecutor(max_workers=workers) as pool:
        rows = list(pool.map(evaluate, episodes))
    return pd.DataFrame(rows, columns=VERDICT_COLUMNS)


def summarize(verdicts):
    """ One row per scene and a total row: merges, successes, failures by
    verdict and the success rate in % """
    def row(scene, group):
        counts = group["verdict"].value_counts()
        merges = len(group)
        successes = int(counts.get(Verdict.MERGED_SUCCESS.value, 0))
        return [scene, merges, successes,
                int(counts.get(Verdict.COLLISION.value, 0)),
                int(counts.get(Verdict.RAMP_END_FAILURE.value, 0)),
                int(counts.get(Verdict.TIMEOUT.value, 0)),
                100. * successes / merges if merges else np.nan]

    rows = [row(scene, group) for scene, group in verdicts.groupby("recording_id", sort=True)]
    rows.append(row("total", verdicts))
    return pd.DataFrame(rows, columns=SUMMARY_COLUMNS)


@dataclass(eq=False)
class Calibration:
    """ Acceleration and lane change duration samples of a record with the
    suggested |a| and T_lane """
    accelerations: np.ndarray
    durations: np.ndarray
    a_mag: float
    t_lane: float

    def acceleration_histogram(self, bins=20):
        return np.histogram(self.accelerations, bins=bins)

    def duration_histogram(self, bins=10):
        return np.histogram(self.durations, bins=bins)


def calibrate(record, percentile=99.5):
    """ |a| as a high percentile of the longitudinal accelerations and T_lane
    as the median lane change duration """
    accelerations, durations = [], []
    for _, track in record.tracks.groupby("id", sort=True):
        accelerations.append(np.diff(track["xVelocity"].to_numpy()) * record.frame_rate)

        moving = np.abs(track["yVelocity"].to_numpy()) > LATERAL_THRESHOLD
        lanes = track["laneId"].to_numpy()
        edges = np.diff(np.concatenate([[0], moving.astype(int), [0]]))
        for start, stop in zip(np.flatnonzero(edges == 1), np.flatnonzero(edges == -1)):
            if lanes[start] != lanes[stop - 1]:
                durations.append((stop - start) / record.frame_rate)

    accelerations = np.concatenate(accelerations) if accelerations else np.zeros(0)
    durations = np.array(durations)
    a_mag = float(np.percentile(np.abs(accelerations), percentile)) if accelerations.size else np.nan
    t_lane = float(np.median(durations)) if durations.size else np.nan
    return Calibration(accelerations, durations, a_mag, t_lane)


def _vehicle_snapshots(record, vehicle_id, model):
    track = record.track(vehicle_id)
    start, end = int(track["frame"].iloc[0]), int(track["frame"].iloc[-1])
    frames, stride = epoch_frames(start, end, model.kinematics.dt, record.frame_rate)
    tracks = _Tracks(record, stride // 2)
    radius = model.simulation.adjacency_radius
    merging = record.ramp_vehicle_ids
    snapshots = [make_snapshot(t, tracks.states(f), model.road, radius, merging)
                 for t, f in enumerate(frames)]
    return frames, tracks, snapshots


def infer_intent(record, vehicle_id, model=None):
    """ Belief trace on the intent of one recorded vehicle, observed at the
    decision epochs of its track. Returns the belief table and the final
    belief. """
    model = model or replace(ModelConfig.replay(), road=infer_road(record))
    _, _, snapshots = _vehicle_snapshots(record, vehicle_id, model)
    history = ObservationHistory.observe(snapshots, model.kinematics)
    beliefs = run_filter(history, vehicle_id, model.road,
                         model.kinematics, model.reward, model.behavior)
    times = [s.time * model.kinematics.dt for s in snapshots]
    return belief_frame(times, vehicle_id, beliefs), beliefs[-1]


@dataclass
class Reproduction:
    trace: pd.DataFrame
    deviation: float
    best_cell: str = field(default="")


def reproduce(record, vehicle_id, sigma, w, model=None):
    """ Drive a virtual vehicle with the behavior model of (sigma, w) from
    the initial state of a recorded vehicle, the other vehicles replayed.

    Returns
        Reproduction with the virtual and actual traces side by side, the
        distance between the final positions and the best cell of the
        filter on the actual track
    """
    model = model or replace(ModelConfig.replay(), road=infer_road(record))
    road, kinematics = model.road, model.kinematics
    frames, tracks, snapshots = _vehicle_snapshots(record, vehicle_id, model)
    history = ObservationHistory.observe(snapshots, kinematics)
    merging = record.ramp_vehicle_ids

    virtual = tracks.state(vehicle_id, frames[0])
    rows = []
    for t, frame in enumerate(frames):
        actual = tracks.state(vehicle_id, frame)
        states = tracks.states(frame, exclude=(vehicle_id,))
        states[vehicle_id] = virtual
        snapshot = make_snapshot(t, states, road, model.simulation.adjacency_radius,
                                 merging)
        action = DriverAction.MAINTAIN
        if snapshot.neighbors(vehicle_id):
            values = InteractionValues(snapshot, vehicle_id, road, kinematics, model.reward,
                                       model.behavior)
            action = values.best_action(sigma, w)
        observed = history.control(t, vehicle_id)
        rows.append([t * kinematics.dt, virtual.x, virtual.y, virtual.v_x,
                     actual.x if actual else np.nan, actual.y if actual else np.nan,
                     actual.v_x if actual else np.nan, action.label,
                     observed.label if observed is not None else ""])
        if t < len(frames) - 1:
            virtual = step(virtual, action, kinematics)

    trace = pd.DataFrame(rows, columns=["time", "x", "y", "v_x", "x_actual", "y_actual",
                                        "v_x_actual", "action", "action_actual"])
    last = trace.iloc[-1]
    deviation = float(np.hypot(last["x"] - last["x_actual"], last["y"] - last["y_actual"]))

    beliefs = run_filter(history, vehicle_id, road, kinematics,
                         model.reward, model.behavior)
    best_cell = beliefs[-1].top(1)[0][0].label
    return Reproduction(trace, deviation, best_cell)


def record_from_trace(trace, recording_id="simulation", frame_rate=FRAME_RATE, lane_width=3.5,
                      ramp_lane_id=RAMP_LANE_ID):
    """ Trajectory record of a simulation trace, one frame per step time """
    rows = []
    for vehicle_id, group in trace.groupby("vehicle_id", sort=True):
        group = group.sort_values("time")
        times = group["time"].to_numpy()
        y = group["y"].to_numpy()
        y_velocity = np.gradient(y, times) if len(times) > 1 else np.zeros(len(times))
        lanes = np.floor(y / lane_width + 1e-9).astype(int) + ramp_lane_id
        for t, x, yy, v, vy, lane in zip(times, group["x"], y, group["v_x"], y_velocity, lanes):
            rows.append([int(round(t * frame_rate)), int(vehicle_id), x, yy, v, vy, lane])
    tracks = pd.DataFrame(rows, columns=TRACK_COLUMNS)
    return TrajectoryRecord(recording_id, _fill_frames(tracks), frame_rate, ramp_lane_id)


def _fill_frames(tracks):
    # linear interpolation between the step frames so that frames are contiguous
    filled = []
    for vehicle_id, group in tracks.groupby("id", sort=True):
        group = group.set_index("frame")
        frames = np.arange(group.index.min(), group.index.max() + 1)
        group = group.reindex(frames)
        group[["x", "y", "xVelocity", "yVelocity"]] = \
            group[["x", "y", "xVelocity", "yVelocity"]].interpolate()
        group["laneId"] = group["laneId"].ffill()
        group["id"] = vehicle_id
        filled.append(group.rename_axis("frame").reset_index())
    return pd.concat(filled, ignore_index=True)[TRACK_COLUMNS]


# synthetic recordings

RAMP_END = 400.
EPISODE_WINDOW = 750
LANE_CHANGE_TIME = 4.


def _lane_change_profile(t, t_cross, lane_width):
    """ y of a merge whose lateral motion crosses the ramp edge at t_cross """
    rate = lane_width / LANE_CHANGE_TIME
    y = lane_width + (t - t_cross) * rate
    low, high = lane_width / 2, 1.5 * lane_width
    y = np.clip(y, low, high)
    v_y = np.where((y > low) & (y < high), rate, 0.)
    return y, v_y


def _straight(vehicle_id, start_frame, n_frames, x0, y, v, frame_rate, lane_width):
    t = np.arange(n_frames) / frame_rate
    lane = int(np.floor(y / lane_width + 1e-9)) + RAMP_LANE_ID
    return pd.DataFrame({
        "frame": start_frame + np.arange(n_frames), "id": vehicle_id,
        "x": x0 + v * t, "y": y, "xVelocity": v, "yVelocity": 0., "laneId": lane})


def generate_recording(seed=0, n_episodes=10, kind="benign", recording_id=None,
                       frame_rate=FRAME_RATE, lane_width=3.5):
    """ Synthetic recording with one merge episode per disjoint frame window.

    kind "benign": the merging vehicle drives at 20 to 28 m/s with at least
    200 m of ramp ahead; highway vehicles at the same speed leave gaps of
    60 m or more around it.
    kind "sealed": a platoon drives alongside the merging vehicle and the
    ramp ends 30 m ahead of it.

    The recorded merging vehicle crosses the ramp edge at the ramp end, so
    that infer_road recovers the ramp extents.
    """
    if kind not in ("benign", "sealed"):
        raise ValueError(f"kind must be benign or sealed. kind = {kind}.")
    if n_episodes < 1:
        raise ValueError(f"n_episodes must be positive. n_episodes = {n_episodes}.")
    rng = np.random.default_rng(seed)
    y_ramp, y_lane1, y_lane2 = (k * lane_width + lane_width / 2 for k in range(3))
    tables = []
    next_id = 1
    for episode in range(n_episodes):
        start = episode * EPISODE_WINDOW
        v = float(rng.uniform(20., 28.))
        x0 = RAMP_END - 30. if kind == "sealed" else float(rng.uniform(50., RAMP_END - 250.))
        t_cross = (RAMP_END - x0) / v
        n_frames = int(np.ceil((t_cross + LANE_CHANGE_TIME) * frame_rate)) + 1
        t = np.arange(n_frames) / frame_rate
        y, v_y = _lane_change_profile(t, t_cross, lane_width)
        tables.append(pd.DataFrame({
            "frame": start + np.arange(n_frames), "id": next_id, "x": x0 + v * t, "y": y,
            "xVelocity": v, "yVelocity": v_y,
            "laneId": np.floor(y / lane_width + 1e-9).astype(int) + RAMP_LANE_ID}))
        next_id += 1

        if kind == "benign":
            others = [(y_lane1, float(rng.uniform(70., 95.))), (y_lane1, -float(rng.uniform(70., 95.))),
                      (y_lane2, float(rng.uniform(60., 90.))), (y_lane2, -float(rng.uniform(60., 90.)))]
        else:
            others = [(y_lane1, 8. * k) for k in range(-3, 4)]
        for lane_y, offset in others:
            tables.append(_straight(next_id, start, n_frames, x0 + offset, lane_y, v,
                                    frame_rate, lane_width))
            next_id += 1

    tracks = pd.concat(tables, ignore_index=True)
    return TrajectoryRecord(recording_id or f"synthetic_{kind}_{seed}", tracks, frame_rate)
