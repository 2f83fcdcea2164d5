"""Closed-loop kinematic race-car simulator used to generate and replay experiments."""

from .car import CarParams, CarState, step_car
from .odometry import HQ, LQ, SlipProfile, corrupt_odometry
from .track import Track, load_track, fixture_track

__all__ = ["CarParams", "CarState", "step_car", "HQ", "LQ", "SlipProfile", "corrupt_odometry",
           "Track", "load_track", "fixture_track"]
