#!/usr/bin/env python3
"""Regenerates the fixture corpus. Output is deterministic; rerun after edits."""

import datetime as dt
import json
import random
import struct
from pathlib import Path

ROOT = Path(__file__).resolve().parent
NODATA = -9999.0
PIXEL = 0.01
MARGIN = 0.03

LAKES = {
    "Lysimachia": {
        "code": "LYS",
        "tile": "T34SEJ",
        "polygon": [[21.35, 38.535], [21.40, 38.535], [21.40, 38.565], [21.35, 38.565]],
        "area": 13.0,
        "ndci": [0.14, 0.17, 0.12],
        "clim": [(7.8, 2.9, 3.9), (8.9, 3.0, 3.5), (11.4, 3.1, 3.0), (14.9, 2.8, 2.1), (19.6, 2.5, 1.2), (24.1, 2.6, 0.4),
                 (26.9, 2.9, 0.2), (26.8, 2.8, 0.3), (22.9, 2.5, 1.1), (18.1, 2.4, 2.7), (13.1, 2.7, 4.6), (9.2, 2.9, 5.1)],
        "weather": (23.5, 2.6),
        "bloom": 140000.0,
    },
    "Trichonida": {
        "code": "TRI",
        "tile": "T34SEJ",
        "polygon": [[21.45, 38.50], [21.65, 38.50], [21.65, 38.62], [21.45, 38.62]],
        "area": 97.0,
        "ndci": [0.03, 0.05, 0.02],
        "clim": [(7.5, 3.2, 4.1), (8.6, 3.3, 3.7), (11.1, 3.4, 3.2), (14.6, 3.1, 2.2), (19.3, 2.8, 1.3), (23.8, 2.9, 0.5),
                 (26.6, 3.2, 0.2), (26.5, 3.1, 0.3), (22.6, 2.8, 1.2), (17.8, 2.7, 2.8), (12.8, 3.0, 4.8), (8.9, 3.2, 5.3)],
        "weather": (23.0, 3.0),
        "bloom": 35000.0,
    },
    "Mornos": {
        "code": "MOR",
        "tile": "T34SFH",
        "polygon": [[22.06, 38.50], [22.13, 38.50], [22.13, 38.54], [22.06, 38.54]],
        "area": 15.5,
        "ndci": [-0.02, -0.01, -0.03],
        "clim": [(4.9, 2.6, 5.0), (5.8, 2.7, 4.6), (8.3, 2.8, 3.9), (11.9, 2.6, 2.8), (16.5, 2.3, 1.7), (21.0, 2.4, 0.7),
                 (24.2, 2.7, 0.3), (24.0, 2.6, 0.4), (19.8, 2.3, 1.4), (14.9, 2.2, 3.2), (9.9, 2.5, 5.4), (6.2, 2.6, 5.9)],
        "weather": (20.5, 2.4),
        "bloom": 4000.0,
    },
}

WEATHER_START = dt.date(2024, 5, 1)
WEATHER_STOP = dt.date(2024, 9, 30)


def centroid(poly):
    lon = sum(p[0] for p in poly) / len(poly)
    lat = sum(p[1] for p in poly) / len(poly)
    return round(lat, 4), round(lon, 4)


def dump(path, value):
    path.parent.mkdir(parents=True, exist_ok=True)
    path.write_text(json.dumps(value, indent=2, ensure_ascii=False) + "\n")


def write_raster(path, width, height, origin, values):
    header = {"width": width, "height": height, "origin": origin, "pixel_size": [PIXEL, PIXEL], "nodata": NODATA}
    path.parent.mkdir(parents=True, exist_ok=True)
    with open(path, "wb") as f:
        f.write(json.dumps(header, separators=(",", ":")).encode() + b"\n")
        f.write(struct.pack("<%dd" % len(values), *values))


def rasters(name, lake, rng):
    poly = lake["polygon"]
    min_lon = min(p[0] for p in poly) - MARGIN
    max_lon = max(p[0] for p in poly) + MARGIN
    min_lat = min(p[1] for p in poly) - MARGIN
    max_lat = max(p[1] for p in poly) + MARGIN
    width = round((max_lon - min_lon) / PIXEL)
    height = round((max_lat - min_lat) / PIXEL)
    origin = [round(min_lon, 4), round(max_lat, 4)]
    footprint = [[origin[0], round(max_lat - height * PIXEL, 4)], [round(min_lon + width * PIXEL, 4), round(max_lat - height * PIXEL, 4)],
                 [round(min_lon + width * PIXEL, 4), origin[1]], [origin[0], origin[1]]]
    variants = []
    for v, ndci in enumerate(lake["ndci"]):
        bands = {"B03": [], "B04": [], "B05": [], "B08": []}
        for row in range(height):
            for col in range(width):
                if (row * 7 + col * 3 + v) % 53 == 0:
                    for b in bands.values():
                        b.append(NODATA)
                    continue
                b4 = round(0.035 + rng.uniform(-0.004, 0.004), 5)
                x = ndci + rng.uniform(-0.02, 0.02)
                b5 = round(b4 * (1 + x) / (1 - x), 5)
                b3 = round(0.06 + rng.uniform(-0.005, 0.005), 5)
                b8 = round(0.014 + rng.uniform(-0.003, 0.003), 5)
                bands["B03"].append(b3)
                bands["B04"].append(b4)
                bands["B05"].append(b5)
                bands["B08"].append(b8)
        assets = {}
        for band, values in bands.items():
            rel = f"{name.lower()}/v{v}_{band}.bin"
            write_raster(ROOT / "scenes" / rel, width, height, origin, values)
            assets[band] = rel
        variants.append(assets)
    return footprint, variants


def scenes():
    rng = random.Random(7)
    catalog = []
    for name, lake in LAKES.items():
        footprint, variants = rasters(name, lake, rng)
        day = dt.date(2024, 5, 2)
        i = 0
        while day <= WEATHER_STOP:
            catalog.append({
                "id": f"S2_{day:%Y%m%d}_{lake['code']}",
                "date": day.isoformat(),
                "tile_id": lake["tile"],
                "cloud_cover": round(rng.uniform(0.5, 60.0), 1),
                "footprint": footprint,
                "assets": variants[i % len(variants)],
            })
            day += dt.timedelta(days=5)
            i += 1
    dump(ROOT / "scenes" / "catalog.json", catalog)


def weather():
    rng = random.Random(11)
    clim = []
    bloom = []
    for name, lake in LAKES.items():
        lat, lon = centroid(lake["polygon"])
        base_t, base_w = lake["weather"]
        samples = []
        day = WEATHER_START
        while day <= WEATHER_STOP:
            season = -4.0 * abs((day - dt.date(2024, 7, 25)).days) / 90.0
            samples.append({
                "date": day.isoformat(),
                "temperature_c": round(base_t + 3.0 + season + rng.uniform(-2.0, 2.0), 1),
                "wind_speed_ms": round(max(0.2, base_w + rng.uniform(-1.5, 2.0)), 1),
                "precipitation_mm": round(rng.choice([0.0, 0.0, 0.0, 0.0, rng.uniform(0.2, 12.0)]), 1),
            })
            day += dt.timedelta(days=1)
        dump(ROOT / "weather" / f"{name.lower()}.json", {"location": {"lat": lat, "lon": lon}, "samples": samples})
        clim.append({
            "name": name,
            "location": {"lat": lat, "lon": lon},
            "monthly": [{"temperature_c": t, "wind_speed_ms": w, "precipitation_mm": p} for t, w, p in lake["clim"]],
        })
        bloom.append({"lat": lat, "lon": lon, "density_cells_per_ml": lake["bloom"]})
    lat, lon = centroid(LAKES["Trichonida"]["polygon"])
    bloom.append({"lat": lat, "lon": lon, "date": "2024-08-20", "density_cells_per_ml": 60000.0})
    dump(ROOT / "climatology.json", clim)
    dump(ROOT / "bloom_stub.json", {"records": bloom, "default_density_cells_per_ml": 1000.0})


def gazetteer():
    dump(ROOT / "gazetteer.json", {
        name: {"polygon": lake["polygon"], "surface_area_km2": lake["area"]} for name, lake in LAKES.items()
    })


KNOWLEDGE = {
    "methods": [
        ("ndci", "NDCI for chlorophyll", "The Normalized Difference Chlorophyll Index uses the red-edge band B05 and the red band B04. Positive values over open water indicate chlorophyll-a; run ndci-index after scene-search and feed it to chl-estimate for concentrations."),
        ("ndwi", "NDWI for surface water", "The Normalized Difference Water Index contrasts green B03 with near-infrared B08. Values above zero mark open water and are used to map shoreline extent and flooding."),
        ("scenes", "Choosing Sentinel-2 scenes", "Search scenes for the area and window first. The clearest scene, with the lowest cloud cover, gives the most reliable index values."),
        ("fallback", "When live weather is missing", "Weather observations may be unavailable for past periods or when the service is down. Declare climatology as the fallback for weather so the report can still describe typical conditions."),
    ],
    "limnology": [
        ("trichonida", "Lake Trichonida", "Trichonida is the largest natural lake in Greece, about 97 square kilometres, deep and mostly oligotrophic to mesotrophic, with summer thermal stratification."),
        ("lysimachia", "Lake Lysimachia", "Lysimachia is a shallow eutrophic lake of about 13 square kilometres south-west of Trichonida, connected to it by a channel and prone to summer cyanobacterial blooms."),
        ("mornos", "Mornos reservoir", "The Mornos reservoir supplies drinking water to Athens. It is oligotrophic with clear water, and algal indices there are usually near zero or negative."),
        ("wind", "Wind and mixing", "Wind above about 4 m/s mixes the surface layer of shallow lakes, breaking up surface scums; calm warm spells favour bloom formation."),
    ],
    "health": [
        ("who-bands", "Cyanobacteria alert levels", "At densities above 20,000 cells/mL recreational users should avoid swallowing water; above 100,000 cells/mL swimming and contact should be avoided and authorities notified."),
        ("pets", "Pets and livestock", "Keep dogs and livestock away from green scums and shorelines with visible discoloration during a bloom."),
        ("drinking", "Drinking-water intakes", "Water suppliers should increase monitoring of intakes and treatment when chlorophyll-a or cyanobacteria densities rise."),
    ],
}


def knowledge():
    for tank, docs in KNOWLEDGE.items():
        lines = [json.dumps({"tank": tank, "id": i, "title": t, "body": b, "source": {"origin": "fixture notes"}}) for i, t, b in docs]
        path = ROOT / "knowledge" / f"{tank}.jsonl"
        path.parent.mkdir(parents=True, exist_ok=True)
        path.write_text("\n".join(lines) + "\n")


def node(id, tool, kind, fallback_for=None):
    n = {"id": id, "tool": tool, "kind": kind}
    if fallback_for:
        n["fallback_for"] = fallback_for
    return n


TRI_BOX = [[38.50, 21.45], [38.50, 21.65], [38.62, 21.65], [38.62, 21.45]]

TASKS = [
    {
        "id": "t01-bloom-trichonida",
        "prompt": "Is it safe to swim in Lake Trichonida at the end of July 2024, or is there an algae bloom?",
        "expertise": "novice",
        "rewrite": "Predict cyanobacteria bloom severity for Lake Trichonida over 2024-07-01 to 2024-07-31 and explain what it means for swimmers.",
        "extract": {"water_body_name": "Trichonida", "lat_lon_polygon": None, "start_date": "2024-07-01", "stop_date": "2024-07-31", "expertise": "novice"},
        "plan": {"nodes": [node("bloom", "bloom-predict", "retrieval"), node("report", "report", "report")],
                 "edges": [["bloom", "report"]]},
        "tools": ["bloom-predict", "report"],
        "order": ["bloom-predict", "report"],
        "summary": "The bloom model puts Lake Trichonida at a moderate cyanobacteria level at the end of July 2024. Swimming is possible but avoid swallowing water and stay out of any green scum.",
    },
    {
        "id": "t02-ndci-lysimachia",
        "prompt": "Compute NDCI for Lake Lysimachia for June 2024.",
        "expertise": "practitioner",
        "rewrite": "Compute the Normalized Difference Chlorophyll Index over Lake Lysimachia from Sentinel-2 scenes acquired 2024-06-01 to 2024-06-30.",
        "extract": {"water_body_name": "Lysimachia", "lat_lon_polygon": None, "start_date": "2024-06-01", "stop_date": "2024-06-30", "expertise": "practitioner"},
        "plan": {"nodes": [node("scenes", "scene-search", "retrieval"), node("ndci", "ndci-index", "transformation"), node("report", "report", "report")],
                 "edges": [["scenes", "ndci"], ["ndci", "report"], ["scenes", "report"]]},
        "tools": ["scene-search", "ndci-index", "report"],
        "order": ["scene-search", "ndci-index", "report"],
        "summary": "NDCI over Lake Lysimachia in June 2024, from the clearest Sentinel-2 scene, is clearly positive, consistent with elevated chlorophyll-a in this eutrophic lake. Follow-up sampling is advisable.",
    },
    {
        "id": "t03-chl-weather-trichonida",
        "prompt": "Estimate chlorophyll-a for Lake Trichonida in August 2024 and relate it to air temperature and wind.",
        "expertise": "expert",
        "rewrite": "Estimate chlorophyll-a from NDCI over Lake Trichonida for 2024-08-01 to 2024-08-31 and compare with daily air temperature and wind speed for the same period.",
        "extract": {"water_body_name": "Trichonida", "lat_lon_polygon": None, "start_date": "2024-08-01", "stop_date": "2024-08-31", "expertise": "expert"},
        "plan": {"nodes": [node("scenes", "scene-search", "retrieval"), node("ndci", "ndci-index", "transformation"),
                           node("chl", "chl-estimate", "transformation"), node("wx", "weather", "retrieval"), node("report", "report", "report")],
                 "edges": [["scenes", "ndci"], ["ndci", "chl"], ["chl", "report"], ["ndci", "report"], ["wx", "report"]]},
        "tools": ["scene-search", "ndci-index", "chl-estimate", "weather", "report"],
        "order": ["scene-search", "ndci-index", "chl-estimate", "report"],
        "summary": "For Lake Trichonida in August 2024 the clearest-scene NDCI is slightly positive and the quadratic model gives a modest chlorophyll-a estimate, in line with a mesotrophic lake. Warm days and light to moderate wind over the month do not point to strong bloom forcing.",
    },
    {
        "id": "t04-weather-mornos",
        "prompt": "What was the weather like at Mornos reservoir during the first week of July 2024?",
        "expertise": "novice",
        "rewrite": "Report daily temperature, wind and rain at the Mornos reservoir from 2024-07-01 to 2024-07-07.",
        "extract": {"water_body_name": "Mornos", "lat_lon_polygon": None, "start_date": "2024-07-01", "stop_date": "2024-07-07", "expertise": "novice"},
        "draft": {"nodes": [node("wx", "weather", "retrieval"), node("report", "report", "report")],
                  "edges": [["wx", "report"], ["report", "wx"]]},
        "plan": {"nodes": [node("wx", "weather", "retrieval"), node("report", "report", "report")],
                 "edges": [["wx", "report"]]},
        "tools": ["weather", "report"],
        "order": ["weather", "report"],
        "summary": "The first week of July 2024 at the Mornos reservoir was hot and mostly dry, with light to moderate wind.",
    },
    {
        "id": "t05-ndwi-trichonida",
        "prompt": "Map surface water with NDWI at Lake Trichonida for May 2024.",
        "expertise": "practitioner",
        "rewrite": "Compute the Normalized Difference Water Index over Lake Trichonida from Sentinel-2 scenes acquired 2024-05-01 to 2024-05-31.",
        "extract": {"water_body_name": "Trichonida", "lat_lon_polygon": None, "start_date": "2024-05-01", "stop_date": "2024-05-31", "expertise": "practitioner"},
        "plan": {"nodes": [node("scenes", "scene-search", "retrieval"), node("ndwi", "ndwi-index", "transformation"), node("report", "report", "report")],
                 "edges": [["scenes", "ndwi"], ["ndwi", "report"], ["scenes", "report"]]},
        "tools": ["scene-search", "ndwi-index", "report"],
        "order": ["scene-search", "ndwi-index", "report"],
        "summary": "NDWI over Lake Trichonida in May 2024 is strongly positive across the lake surface, confirming open water throughout the mapped area.",
    },
    {
        "id": "t06-bloom-chl-weather-lysimachia",
        "prompt": "Assess cyanobacteria bloom severity, chlorophyll-a and weather drivers at Lake Lysimachia over 15-31 July 2024.",
        "expertise": "expert",
        "rewrite": "For Lake Lysimachia from 2024-07-15 to 2024-07-31, predict cyanobacteria bloom severity, estimate chlorophyll-a from NDCI and summarize temperature, wind and rain.",
        "extract": {"water_body_name": "Lysimachia", "lat_lon_polygon": None, "start_date": "2024-07-15", "stop_date": "2024-07-31", "expertise": "expert"},
        "plan": {"nodes": [node("bloom", "bloom-predict", "retrieval"), node("scenes", "scene-search", "retrieval"),
                           node("ndci", "ndci-index", "transformation"), node("chl", "chl-estimate", "transformation"),
                           node("wx", "weather", "retrieval"), node("report", "report", "report")],
                 "edges": [["scenes", "ndci"], ["ndci", "chl"], ["ndci", "report"], ["chl", "report"], ["bloom", "report"], ["wx", "report"]]},
        "tools": ["bloom-predict", "scene-search", "ndci-index", "chl-estimate", "weather", "report"],
        "order": ["scene-search", "ndci-index", "chl-estimate", "report"],
        "summary": "Lake Lysimachia in late July 2024 shows high NDCI and elevated chlorophyll-a under warm, mostly calm weather.",
        "flag": {"issues": ["The summary does not state the predicted bloom severity level."], "sections": ["Summary"]},
        "revised": "Lake Lysimachia in late July 2024 is at a high cyanobacteria bloom severity according to the bloom model, matching the high NDCI and elevated chlorophyll-a estimate. Warm, mostly calm weather over 15-31 July favoured the bloom; contact advisories are warranted.",
    },
    {
        "id": "t07-greenness-mornos",
        "prompt": "How green is the water in Mornos reservoir in September 2024?",
        "expertise": "novice",
        "rewrite": "Estimate chlorophyll-a from NDCI over the Mornos reservoir for 2024-09-01 to 2024-09-30 and explain how green the water is.",
        "extract": {"water_body_name": "Mornos", "lat_lon_polygon": None, "start_date": "2024-09-01", "stop_date": "2024-09-30", "expertise": "novice"},
        "plan": {"nodes": [node("scenes", "scene-search", "retrieval"), node("ndci", "ndci-index", "transformation"),
                           node("chl", "chl-estimate", "transformation"), node("report", "report", "report")],
                 "edges": [["scenes", "ndci"], ["ndci", "chl"], ["chl", "report"]]},
        "tools": ["scene-search", "ndci-index", "chl-estimate", "report"],
        "order": ["scene-search", "ndci-index", "chl-estimate", "report"],
        "summary": "The Mornos reservoir was not green in September 2024: the satellite index is around zero and the estimated algae level is low, as expected for a clean drinking-water reservoir.",
    },
    {
        "id": "t08-polygon-weather-bloom",
        "prompt": "Check weather and bloom risk for the area with corners 38.50,21.45 / 38.50,21.65 / 38.62,21.65 / 38.62,21.45 between 2024-08-10 and 2024-08-20.",
        "expertise": "practitioner",
        "rewrite": "For the polygon (38.50,21.45), (38.50,21.65), (38.62,21.65), (38.62,21.45) from 2024-08-10 to 2024-08-20, report daily weather and predict cyanobacteria bloom severity.",
        "extract": {"water_body_name": None, "lat_lon_polygon": TRI_BOX, "start_date": "2024-08-10", "stop_date": "2024-08-20", "expertise": "practitioner"},
        "plan": {"nodes": [node("wx", "weather", "retrieval"), node("bloom", "bloom-predict", "retrieval"), node("report", "report", "report")],
                 "edges": [["wx", "report"], ["bloom", "report"]]},
        "tools": ["weather", "bloom-predict", "report"],
        "order": ["weather", "report"],
        "summary": "For the requested polygon between 10 and 20 August 2024 the bloom model returns a moderate cyanobacteria level on 20 August. Weather over the period was warm with light to moderate wind; routine advisories for moderate levels apply.",
    },
    {
        "id": "t09-climatology-fallback",
        "prompt": "Summarize the weather at Lake Trichonida in March 2023.",
        "expertise": "practitioner",
        "rewrite": "Summarize daily temperature, wind and rain at Lake Trichonida from 2023-03-01 to 2023-03-31.",
        "extract": {"water_body_name": "Trichonida", "lat_lon_polygon": None, "start_date": "2023-03-01", "stop_date": "2023-03-31", "expertise": "practitioner"},
        "plan": {"nodes": [node("wx", "weather", "retrieval"), node("clim", "climatology", "retrieval", fallback_for="wx"), node("report", "report", "report")],
                 "edges": [["wx", "report"]]},
        "tools": ["weather", "report"],
        "order": ["weather", "report"],
        "summary": "Observed weather for Lake Trichonida in March 2023 was not available, so the report uses long-term March normals: cool days, moderate wind and regular rain.",
    },
    {
        "id": "t10-ndci-ndwi-lysimachia",
        "prompt": "Compare NDCI and NDWI for Lake Lysimachia between 2024-06-15 and 2024-07-15.",
        "expertise": "expert",
        "rewrite": "Compute NDCI and NDWI over Lake Lysimachia from the clearest Sentinel-2 scene acquired 2024-06-15 to 2024-07-15 and compare them.",
        "extract": {"water_body_name": "Lysimachia", "lat_lon_polygon": None, "start_date": "2024-06-15", "stop_date": "2024-07-15", "expertise": "expert"},
        "plan": {"nodes": [node("scenes", "scene-search", "retrieval"), node("ndci", "ndci-index", "transformation"),
                           node("ndwi", "ndwi-index", "transformation"), node("report", "report", "report")],
                 "edges": [["scenes", "ndci"], ["scenes", "ndwi"], ["ndci", "report"], ["ndwi", "report"]]},
        "tools": ["scene-search", "ndci-index", "ndwi-index", "report"],
        "order": ["scene-search", "ndci-index", "report"],
        "summary": "Over Lake Lysimachia between 15 June and 15 July 2024 NDWI is strongly positive, confirming open water, while NDCI is clearly positive, indicating elevated chlorophyll-a on the same scene.",
    },
]

SECTIONS = {
    "Overview": {
        "novice": "This report answers your question using satellite images, weather records and a bloom model for the lake and dates you asked about.",
        "practitioner": "This report compiles the tool outputs gathered for the requested water body and period; values are listed with units below.",
        "expert": "Report assembled from the executed workflow; each section cites the nodes whose artifacts it draws on.",
    },
    "Observations": {
        "novice": "These are the place, dates and satellite passes the analysis used.",
        "practitioner": "Area of interest, analysis window and the Sentinel-2 acquisitions considered.",
        "expert": "Spatial and temporal extent of the analysis and the Sentinel-2 L2A scenes intersecting it.",
    },
    "Indices": {
        "novice": "Satellite colour measurements show how much algae and open water there is; higher algae numbers mean greener water.",
        "practitioner": "Index values are zonal means over the area of interest from the clearest scene; chlorophyll-a is estimated from NDCI.",
        "expert": "NDCI = (B05 - B04)/(B05 + B04) and NDWI = (B03 - B08)/(B03 + B08), aggregated as zonal means; chlorophyll-a via the quadratic NDCI model.",
    },
    "Predictions": {
        "novice": "The bloom forecast tells you how likely harmful algae are. Follow local advice and keep children and pets out of green or scummy water.",
        "practitioner": "Bloom severity is graded from predicted cyanobacteria density against the configured alert thresholds; guidance notes follow.",
        "expert": "Severity derives from the predicted cyanobacteria density at the area centroid on the final day of the window, graded against the alert thresholds.",
    },
    "Weather context": {
        "novice": "Warm, calm weather helps algae grow, while wind and rain mix the water.",
        "practitioner": "Daily temperature, wind speed and precipitation over the window; calm warm spells favour bloom development.",
        "expert": "Daily meteorological forcing over the window; wind-driven mixing and heat accumulation are the primary bloom drivers considered.",
    },
    "Caveats": {
        "novice": "Some data could not be fetched live, so parts of this report rely on substitutes.",
        "practitioner": "Some steps used fallback or cached data; treat affected values accordingly.",
        "expert": "Parts of the workflow resolved through fallbacks or cache; provenance is noted per node.",
    },
}

CLEAR = json.dumps({"relevant": True, "revise": False, "issues": []})


def provider():
    entries = []
    for t in TASKS:
        q = "Original query: " + t["prompt"]
        entries.append({"stage": "rewrite", "contains": [t["prompt"]], "response": t["rewrite"]})
        entries.append({"stage": "extract", "contains": [q], "response": json.dumps(t["extract"])})
        entries.append({"stage": "plan", "contains": [q], "response": json.dumps(t.get("draft", t["plan"]))})
        if "draft" in t:
            entries.append({"stage": "repair", "contains": ["Task: " + t["rewrite"]], "response": json.dumps(t["plan"])})
        entries.append({"stage": "summary", "contains": [q], "response": t["summary"]})
        if "flag" in t:
            verdict = {"relevant": False, "revise": True, **t["flag"]}
            entries.append({"stage": "reflect", "contains": [q, "Reflection round 1"], "response": json.dumps(verdict)})
            entries.append({"stage": "revise", "contains": [q, "Section: Summary"], "response": t["revised"]})
    for heading, by_audience in SECTIONS.items():
        for audience, text in by_audience.items():
            entries.append({"stage": "report", "contains": [f"Section: {heading}\nAudience: {audience}"], "response": text})
    entries.append({"stage": "reflect", "response": CLEAR})
    entries.append({"stage": "revise", "response": "The section has been rewritten to address the reviewer's points."})
    dump(ROOT / "scripted_provider.json", {"model_id": "scripted-fixture", "entries": entries})


def gold():
    lines = []
    for t in TASKS:
        ex = t["extract"]
        params = {
            "start_date": ex["start_date"],
            "stop_date": ex["stop_date"],
            "expertise": ex["expertise"],
            "has_aoi": True,
        }
        if ex["water_body_name"]:
            params["water_body_name"] = ex["water_body_name"]
        lines.append(json.dumps({
            "id": t["id"],
            "prompt": t["prompt"],
            "expertise": t["expertise"],
            "expected_tools": sorted(t["tools"]),
            "expected_order": t["order"],
            "expected_params": params,
        }))
    (ROOT / "gold.jsonl").write_text("\n".join(lines) + "\n")
    (ROOT / "prompts.txt").write_text("\n".join(t["prompt"] for t in TASKS) + "\n")


def config():
    dump(ROOT / "config.json", {
        "data_dir": "data",
        "provider": {"kind": "scripted", "script": "scripted_provider.json"},
        "embedding": {"kind": "hash", "dimension": 64},
        "workers": 4,
        "retry": {"max_attempts": 2, "backoff_ms": 0, "remote_timeout_secs": 10},
        "repair_attempts": 3,
        "reflection_rounds": 2,
        "retrieval": {"k": 2, "context_budget": 1200},
        "tanks": {"methods": ["planning"], "limnology": ["planning", "report"], "health": ["tool", "report"]},
        "knowledge_dir": "knowledge",
        "gazetteer": "gazetteer.json",
        "tools": {
            "catalog": {"kind": "mock", "path": "scenes/catalog.json"},
            "assets_dir": "scenes",
            "weather": {"kind": "stub", "dir": "weather"},
            "climatology": "climatology.json",
            "bloom": {"kind": "stub", "path": "bloom_stub.json"},
        },
        "deterministic": True,
        "listen": "127.0.0.1:8080",
        "model_parameters": "n/a",
    })


if __name__ == "__main__":
    scenes()
    weather()
    gazetteer()
    knowledge()
    provider()
    gold()
    config()
