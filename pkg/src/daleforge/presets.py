"""Appliance catalogue and house presets.

Power levels and dwell times are illustrative approximations of typical UK
appliances, not measurements. Resistive loads use PF 1.0 and motor loads PF 0.6.
"""

from __future__ import annotations

from daleforge.household import HouseConfig, house_config_from_dict

RESISTIVE_PF = 1.0
MOTOR_PF = 0.6

HOUR = 3600.0
DAY = 86400.0


def _state(name, watts, dwell, next=None, pf=RESISTIVE_PF):
    apparent = max(round(watts / pf, 3), float(watts))
    s = {"name": name, "active": float(watts), "apparent": apparent, "mean_dwell": float(dwell)}
    if next:
        s["next"] = dict(next)
    return s


def on_off(name, watts, on_mean, off_mean, pf=RESISTIVE_PF, standby=0.0, meter="iam", room=None, **extra):
    d = {
        "name": name,
        "meter": meter,
        "states": [
            _state("off", standby, off_mean, {"on": 1.0}, pf=RESISTIVE_PF),
            _state("on", watts, on_mean, {"off": 1.0}, pf=pf),
        ],
    }
    if room:
        d["room"] = room
    d.update(extra)
    return d


def always_on(name, watts, pf=RESISTIVE_PF, meter="iam", room=None):
    d = {"name": name, "meter": meter, "states": [_state("on", watts, DAY, pf=pf)]}
    if room:
        d["room"] = room
    return d


def fridge(name="fridge", meter="iam"):
    # compressor cycling, door-open lamp and an occasional defrost heater
    return {
        "name": name,
        "meter": meter,
        "room": "kitchen",
        "states": [
            _state("idle", 0, 1500, {"compressor": 0.93, "lamp": 0.07}),
            _state("compressor", 90, 1200, {"idle": 0.98, "defrost": 0.02}, pf=MOTOR_PF),
            _state("lamp", 17, 90, {"idle": 1.0}),
            _state("defrost", 250, 900, {"idle": 1.0}),
        ],
    }


def kettle():
    return on_off("kettle", 2800, 150, 3 * HOUR, room="kitchen")


def washing_machine():
    return {
        "name": "washing_machine",
        "meter": "iam",
        "room": "utility",
        "states": [
            _state("off", 0, 1.5 * DAY, {"fill": 1.0}),
            _state("fill", 20, 600, {"heat": 1.0}),
            _state("heat", 2000, 900, {"wash": 1.0}),
            _state("wash", 150, 1800, {"spin": 1.0}, pf=MOTOR_PF),
            _state("spin", 500, 600, {"off": 1.0}, pf=MOTOR_PF),
        ],
    }


def dishwasher():
    return {
        "name": "dish_washer",
        "meter": "iam",
        "room": "kitchen",
        "states": [
            _state("off", 0, DAY, {"heat": 1.0}),
            _state("heat", 2100, 1200, {"wash": 1.0}),
            _state("wash", 80, 2400, {"dry": 1.0}, pf=MOTOR_PF),
            _state("dry", 700, 900, {"off": 1.0}),
        ],
    }


VACUUM_SETTINGS = (350, 500, 650, 800, 950, 1100)


def vacuum():
    # six discrete power settings; the meter stays attached to the unplugged cleaner
    settings = [f"setting_{k + 1}" for k in range(len(VACUUM_SETTINGS))]
    states = [_state("off", 0, 2 * DAY, {s: 1 / len(settings) for s in settings})]
    for name, watts in zip(settings, VACUUM_SETTINGS):
        states.append(_state(name, watts, 240, {"off": 1.0}, pf=MOTOR_PF))
    return {"name": "vacuum_cleaner", "meter": "iam", "room": "hall", "unplug_when_off": True, "states": states}


def lights(name, watts, on_mean=2 * HOUR, off_mean=5 * HOUR, meter="iam", room=None):
    return on_off(name, watts, on_mean, off_mean, meter=meter, room=room)


def boiler():
    return {
        "name": "boiler",
        "meter": "ct",
        "room": "kitchen",
        "states": [
            _state("standby", 4, 2 * HOUR, {"firing": 1.0}),
            _state("firing", 80, 40 * 60, {"standby": 1.0}, pf=MOTOR_PF),
        ],
    }


def small_house() -> HouseConfig:
    """Five metered appliances and a little vampire load."""
    return house_config_from_dict(
        {
            "vampire_power": 40.0,
            "metadata": {"building_type": "end of terrace", "construction_year": 1905, "heating": "natural gas", "occupants": 2},
            "appliances": [fridge(), kettle(), washing_machine(), lights("living_room_lights", 60, room="lounge"), vacuum()],
        }
    )


def house_1() -> HouseConfig:
    """Heavily submetered house: 52 plug monitors, a few CT-metered circuits and some unmetered load."""
    iam = [
        fridge("fridge_freezer"),
        kettle(),
        washing_machine(),
        dishwasher(),
        vacuum(),
        on_off("toaster", 1500, 180, 12 * HOUR, room="kitchen"),
        on_off("microwave", 1200, 240, 8 * HOUR, pf=0.9, standby=3, room="kitchen"),
        on_off("breadmaker", 500, 1800, 4 * DAY, room="kitchen"),
        on_off("coffee_maker", 900, 300, 16 * HOUR, room="kitchen"),
        on_off("food_mixer", 300, 300, 3 * DAY, pf=MOTOR_PF, room="kitchen"),
        on_off("tumble_dryer", 2200, 3600, 3 * DAY, room="utility"),
        on_off("iron", 1200, 1200, 3 * DAY, room="utility"),
        on_off("hair_dryer", 1500, 300, DAY, room="bathroom"),
        on_off("straighteners", 60, 900, 2 * DAY, room="bathroom"),
        on_off("electric_shaver", 8, 300, DAY, room="bathroom"),
        on_off("toothbrush_charger", 6, 2 * HOUR, 10 * HOUR, room="bathroom"),
        on_off("television", 95, 3 * HOUR, 9 * HOUR, standby=2, room="lounge"),
        on_off("hifi", 45, 2 * HOUR, 10 * HOUR, standby=3, room="lounge"),
        on_off("subwoofer", 30, 2 * HOUR, 10 * HOUR, room="lounge"),
        on_off("home_theatre_pc", 65, 4 * HOUR, 8 * HOUR, standby=2, room="lounge"),
        on_off("dvd_player", 15, HOUR, 2 * DAY, standby=1, room="lounge"),
        on_off("games_console", 110, 2 * HOUR, 2 * DAY, standby=1, room="lounge"),
        on_off("desktop_computer", 110, 6 * HOUR, 10 * HOUR, standby=3, room="study"),
        on_off("computer_monitor", 35, 6 * HOUR, 10 * HOUR, standby=1, room="study"),
        on_off("laptop_computer", 45, 4 * HOUR, 8 * HOUR, room="study"),
        on_off("laser_printer", 400, 120, 2 * DAY, standby=6, room="study"),
        on_off("inkjet_printer", 20, 300, 3 * DAY, standby=2, room="study"),
        on_off("scanner", 15, 300, 5 * DAY, standby=2, room="study"),
        on_off("speakers", 10, 6 * HOUR, 10 * HOUR, room="study"),
        on_off("desk_lamp", 40, 3 * HOUR, 10 * HOUR, room="study"),
        on_off("office_lamp", 25, 3 * HOUR, 12 * HOUR, room="study"),
        on_off("bedroom_lamp", 40, HOUR, 20 * HOUR, room="bedroom"),
        on_off("bedside_lamp", 25, HOUR, 20 * HOUR, room="bedroom"),
        on_off("bedroom_tv", 60, 2 * HOUR, DAY, standby=1, room="bedroom"),
        on_off("baby_monitor", 4, 10 * HOUR, 14 * HOUR, room="bedroom"),
        on_off("electric_blanket", 60, 2 * HOUR, 2 * DAY, room="bedroom"),
        on_off("fan", 40, 3 * HOUR, 2 * DAY, pf=MOTOR_PF, room="bedroom"),
        on_off("phone_charger", 5, 2 * HOUR, 10 * HOUR, room="bedroom"),
        on_off("tablet_charger", 10, 2 * HOUR, 20 * HOUR, room="lounge"),
        on_off("camera_charger", 6, 3 * HOUR, 4 * DAY, room="study"),
        on_off("soldering_iron", 40, 2 * HOUR, 6 * DAY, room="workshop"),
        on_off("drill_charger", 30, 2 * HOUR, 6 * DAY, room="workshop"),
        on_off("aquarium", 60, 10 * HOUR, 14 * HOUR, room="lounge"),
        on_off("dehumidifier", 200, 2 * HOUR, 2 * DAY, pf=MOTOR_PF, room="utility"),
        on_off("immersion_heater", 3000, 1800, 5 * DAY, room="utility"),
        always_on("broadband_router", 9, room="hall"),
        always_on("network_switch", 7, room="study"),
        always_on("network_attached_storage", 14, room="study"),
        always_on("home_server", 28, room="study"),
        always_on("cordless_phone", 3, room="hall"),
        always_on("security_alarm", 5, room="hall"),
        always_on("clock_radio", 2, room="bedroom"),
    ]
    ct = [
        boiler(),
        lights("lighting_circuit", 180, on_mean=2.5 * HOUR, off_mean=3 * HOUR, meter="ct", room="house"),
        lights("kitchen_lights", 100, on_mean=HOUR, off_mean=4 * HOUR, meter="ct", room="kitchen"),
        on_off("solar_thermal_pump", 60, 3 * HOUR, 6 * HOUR, pf=MOTOR_PF, meter="ct", room="loft"),
    ]
    unmetered = [
        on_off("unmetered_sockets", 40, 8 * HOUR, 4 * HOUR, meter=None, room="house"),
        on_off("unmetered_heater", 450, 15 * 60, 2 * HOUR, meter=None, room="house"),
    ]
    return house_config_from_dict(
        {
            "iam_count": 52,
            "vampire_power": 65.0,
            "metadata": {
                "building_type": "end of terrace",
                "construction_year": 1905,
                "heating": "natural gas",
                "occupants": 4,
                "description": "synthetic house modelled on a heavily submetered home",
            },
            "appliances": iam + ct + unmetered,
        }
    )


PRESETS = {"small": small_house, "house_1": house_1}


def get_preset(name: str) -> HouseConfig:
    try:
        return PRESETS[name]()
    except KeyError:
        raise KeyError(f"unknown house preset {name!r}; choose from {sorted(PRESETS)}") from None
