#!/usr/bin/env python3
"""Regenerates the bundled toy intent corpus under crates/core/data/toy/.

12 intents x 40 utterances (24 train / 6 validation / 10 test), plus a
disjoint pool of 60 utterances per intent (generator.jsonl) that the offline
mock generator draws on in place of a pretrained model's knowledge. The pool
uses wider slot inventories and a few extra phrasings. Three intent
pairs share slot vocabulary so that a bag-of-words model confuses them:
accept_reservation/book_restaurant, alarm_query/alarm_set and
refund_not_showing_up/request_refund.
"""
import itertools
import json
import random
from pathlib import Path

RESTAURANTS = ["hanover steakhouse", "bibiana's", "the olive garden", "golden dragon",
               "luigi's trattoria", "the blue fin", "casa mia", "sakura sushi",
               "el charro", "the rusty anchor", "maison blanche", "taj palace",
               "nando's", "the green fork", "pho saigon", "bella napoli", "smoke house",
               "the copper kettle", "little lisbon", "kebab king", "seoul garden",
               "the oyster bar", "cafe du monde", "harvest table"]
CITIES = ["philadelphia", "boston", "chicago", "greenwich", "denver", "seattle",
          "austin", "portland", "san diego", "atlanta", "nashville", "phoenix",
          "baltimore", "dallas", "detroit", "omaha", "tucson", "savannah"]
MEALS = ["dinner", "lunch", "brunch", "breakfast", "supper", "late night drinks"]
PARTY = ["two", "four", "six", "eight", "three", "five", "ten", "twelve"]
TIMES = ["7 am", "6 30 in the morning", "noon", "tomorrow morning", "9 pm",
         "friday", "the weekend", "tonight", "monday", "5 am", "quarter past eight",
         "sunday afternoon", "10 pm", "half past six", "wednesday", "midnight",
         "thursday evening", "4 45 am", "saturday", "11 am tomorrow", "every weekday",
         "the end of my nap", "3 pm", "tuesday"]
ITEMS = ["my shoes", "the jacket", "my order", "the headphones", "the laptop",
         "a broken phone", "the concert tickets", "my purchase", "the blender",
         "a damaged sofa", "the hotel booking", "my gym membership", "the flight",
         "a defective charger", "the winter coat", "my subscription", "the printer",
         "a cracked mirror", "the rental car", "the espresso machine", "my textbook",
         "the sneakers", "a faulty kettle", "the train ticket"]
ACCOUNTS = ["statement", "account", "credit card", "bank balance", "card",
            "checking account", "paypal", "debit card", "online banking"]
CITIES_WEATHER = ["london", "paris", "tokyo", "new york", "miami", "berlin", "oslo",
                  "madrid", "cairo", "sydney", "toronto", "dublin", "lima", "mumbai",
                  "reykjavik", "nairobi", "seoul", "vienna", "athens", "havana"]
DAYS = ["today", "tomorrow", "this weekend", "on friday", "next week", "tonight",
        "this afternoon", "on monday", "later today", "over the holidays"]
ARTISTS = ["taylor swift", "the beatles", "miles davis", "adele", "queen",
           "some jazz", "classical music", "my workout playlist", "bob marley",
           "nirvana", "beyonce", "daft punk", "johnny cash", "lo fi beats",
           "kendrick lamar", "fleetwood mac", "billie eilish", "mozart",
           "the rolling stones", "country hits", "ed sheeran", "led zeppelin"]
AMOUNTS = ["50 dollars", "100 dollars", "twenty euros", "300 pounds", "the rent money",
           "75 bucks", "1200 dollars", "fifteen pounds", "my paycheck", "40 euros",
           "250 dollars", "the deposit"]
PEOPLE = ["my mom", "john", "my savings account", "my landlord", "sarah", "my brother",
          "my sister", "alex", "the babysitter", "my roommate", "grandpa", "maria",
          "my business account", "the plumber", "dad", "priya"]
LANGS = ["spanish", "french", "german", "japanese", "italian", "portuguese",
         "korean", "dutch", "swedish", "arabic", "hindi", "greek", "polish", "turkish"]
PHRASES = ["good morning", "where is the station", "thank you very much",
           "how much does this cost", "i love you", "see you later", "cheers",
           "where is the bathroom", "happy birthday", "i am lost", "nice to meet you",
           "the bill please", "good night", "i am allergic to nuts", "what time is it"]
DISHES = ["lasagna", "pancakes", "chicken curry", "banana bread", "guacamole",
          "tomato soup", "fried rice", "beef stew", "pad thai", "apple pie",
          "risotto", "fish tacos", "hummus", "carrot cake", "ramen", "paella",
          "meatballs", "french toast", "shakshuka", "brownies", "falafel", "gumbo"]
# Intent-neutral openers and closers that every intent may carry.
OPENERS = ["", "", "", "", "hey ", "ok ", "um ", "quick question ", "excuse me ",
           "hi there ", "so ", "alright "]
CLOSERS = ["", "", "", "", " please", " thanks", " asap", " if you can",
           " thank you", " right now", " for me"]

INTENTS = {
    "accept_reservation": [
        ("does {r} take reservations", dict(r=RESTAURANTS)),
        ("are there any restaurants that take reservations for {m} in {c}", dict(m=MEALS, c=CITIES)),
        ("do they accept reservations at {r} in {c}", dict(r=RESTAURANTS, c=CITIES)),
        ("is it possible to reserve ahead at {r}", dict(r=RESTAURANTS)),
        ("will {r} let me make a reservation for {m}", dict(r=RESTAURANTS, m=MEALS)),
        ("does {r} do reservations or is it walk in only", dict(r=RESTAURANTS)),
    ],
    "book_restaurant": [
        ("book a table at {r} for {p}", dict(r=RESTAURANTS, p=PARTY)),
        ("reserve a table for {m} at {r} in {c}", dict(m=MEALS, r=RESTAURANTS, c=CITIES)),
        ("i need a table for {p} people at {r}", dict(p=PARTY, r=RESTAURANTS)),
        ("get me a {m} reservation for {p} at {r}", dict(m=MEALS, p=PARTY, r=RESTAURANTS)),
        ("please make a booking at {r} for {m}", dict(r=RESTAURANTS, m=MEALS)),
        ("find a restaurant in {c} and book {m} for {p}", dict(c=CITIES, m=MEALS, p=PARTY)),
    ],
    "alarm_query": [
        ("what alarms do i have set for {t}", dict(t=TIMES)),
        ("show me all the alarms for {t}", dict(t=TIMES)),
        ("is there an alarm set for {t}", dict(t=TIMES)),
        ("list my alarms", {}),
        ("did i already set an alarm for {t}", dict(t=TIMES)),
        ("which alarms are active right now", {}),
        ("how many alarms do i have for {t}", dict(t=TIMES)),
    ],
    "alarm_set": [
        ("set an alarm for {t}", dict(t=TIMES)),
        ("wake me up at {t}", dict(t=TIMES)),
        ("please create an alarm for {t}", dict(t=TIMES)),
        ("i need an alarm to go off at {t}", dict(t=TIMES)),
        ("add a new alarm for {t}", dict(t=TIMES)),
        ("remind me with an alarm {t}", dict(t=TIMES)),
    ],
    "refund_not_showing_up": [
        ("i didn't see my refund for {i} appear on my {a}", dict(i=ITEMS, a=ACCOUNTS)),
        ("my refund for {i} is still not showing on my {a}", dict(i=ITEMS, a=ACCOUNTS)),
        ("where is the refund for {i}", dict(i=ITEMS)),
        ("the store said they refunded {i} but nothing is on my {a}", dict(i=ITEMS, a=ACCOUNTS)),
        ("why hasn't my refund arrived in my {a} yet", dict(a=ACCOUNTS)),
        ("still waiting for the refund of {i} to show up", dict(i=ITEMS)),
    ],
    "request_refund": [
        ("i want a refund for {i}", dict(i=ITEMS)),
        ("can i get my money back for {i}", dict(i=ITEMS)),
        ("how do i request a refund for {i}", dict(i=ITEMS)),
        ("please refund {i} to my {a}", dict(i=ITEMS, a=ACCOUNTS)),
        ("i would like to return {i} and get refunded", dict(i=ITEMS)),
        ("start a refund request for {i}", dict(i=ITEMS)),
    ],
    "weather_query": [
        ("what is the weather in {w} {d}", dict(w=CITIES_WEATHER, d=DAYS)),
        ("will it rain in {w} {d}", dict(w=CITIES_WEATHER, d=DAYS)),
        ("how hot will it be {d}", dict(d=DAYS)),
        ("do i need an umbrella in {w} {d}", dict(w=CITIES_WEATHER, d=DAYS)),
        ("give me the forecast for {w}", dict(w=CITIES_WEATHER)),
    ],
    "play_music": [
        ("play {s}", dict(s=ARTISTS)),
        ("put on {s} please", dict(s=ARTISTS)),
        ("i want to listen to {s}", dict(s=ARTISTS)),
        ("start playing {s} in the living room", dict(s=ARTISTS)),
        ("can you shuffle songs by {s}", dict(s=ARTISTS)),
    ],
    "transfer_money": [
        ("send {x} to {o}", dict(x=AMOUNTS, o=PEOPLE)),
        ("transfer {x} to {o}", dict(x=AMOUNTS, o=PEOPLE)),
        ("move {x} from checking to {o}", dict(x=AMOUNTS, o=PEOPLE)),
        ("i need to wire {x} to {o} today", dict(x=AMOUNTS, o=PEOPLE)),
        ("pay {o} {x} from my account", dict(o=PEOPLE, x=AMOUNTS)),
    ],
    "card_lost": [
        ("i lost my {a}", dict(a=["credit card", "debit card", "card", "bank card"])),
        ("my {a} was stolen {d}", dict(a=["credit card", "debit card", "wallet", "card"], d=DAYS)),
        ("i can't find my {a} anywhere", dict(a=["credit card", "debit card", "card", "visa card"])),
        ("please block my card because it is missing", {}),
        ("someone took my {a} what should i do", dict(a=["credit card", "debit card", "wallet"])),
        ("report a lost {a}", dict(a=["credit card", "debit card", "card", "bank card"])),
        ("freeze my {a} i think i left it at {r}", dict(a=["credit card", "debit card", "card"], r=RESTAURANTS)),
    ],
    "translate": [
        ("how do you say {q} in {l}", dict(q=PHRASES, l=LANGS)),
        ("translate {q} to {l}", dict(q=PHRASES, l=LANGS)),
        ("what is {q} in {l}", dict(q=PHRASES, l=LANGS)),
        ("what does {q} mean in {l}", dict(q=PHRASES, l=LANGS)),
    ],
    "cooking_recipe": [
        ("how do i make {k}", dict(k=DISHES)),
        ("give me a recipe for {k}", dict(k=DISHES)),
        ("what ingredients do i need for {k}", dict(k=DISHES)),
        ("find an easy {k} recipe for {m}", dict(k=DISHES, m=MEALS)),
        ("how long should i cook {k}", dict(k=DISHES)),
    ],
}


# Slot values and phrasings only the generator pool uses: a pretrained
# generator knows far more of both than any single task dataset.
EXTRA_VALUES = {
    "RESTAURANTS": ["the ivy", "chez panisse", "wild ginger", "the salty pig", "olive and vine",
                    "dim sum palace", "burger barn", "the tipsy cow", "la piazza", "noodle bar 88"],
    "CITIES": ["memphis", "raleigh", "boise", "miami beach", "pittsburgh", "albany", "reno", "tampa"],
    "MEALS": ["a business lunch", "an anniversary dinner", "sunday brunch"],
    "PARTY": ["nine", "fifteen", "a big group", "just me"],
    "TIMES": ["dawn", "7 15", "lunchtime", "the school run", "twenty minutes from now",
              "8 am on saturday", "sunrise", "1 30 pm", "friday night", "the early shift"],
    "ITEMS": ["the yoga mat", "my concert pass", "the vacuum cleaner", "a torn backpack",
              "the gift card", "my airline upgrade", "the smartwatch", "a stained rug",
              "the bike helmet", "my meal kit"],
    "ACCOUNTS": ["savings", "venmo", "amex", "mastercard"],
    "CITIES_WEATHER": ["lisbon", "prague", "bangkok", "cape town", "vancouver", "rome",
                       "zurich", "hanoi", "anchorage", "marrakesh"],
    "DAYS": ["this evening", "next tuesday", "during my trip", "over easter"],
    "ARTISTS": ["radiohead", "stevie wonder", "dua lipa", "bach", "the weeknd",
                "a podcast about space", "rainy day jazz", "90s hip hop", "coldplay", "abba"],
    "AMOUNTS": ["500 dollars", "ten quid", "the tuition fee", "60 francs", "my bonus"],
    "PEOPLE": ["my cousin", "the daycare", "uncle ben", "my tax account", "lena", "the contractor"],
    "LANGS": ["mandarin", "russian", "vietnamese", "finnish", "hebrew", "swahili"],
    "PHRASES": ["call an ambulance", "is this seat taken", "congratulations",
                "where can i buy tickets", "no thank you", "i need a doctor"],
    "DISHES": ["tiramisu", "butter chicken", "sourdough", "ceviche", "lentil soup",
               "quiche", "bibimbap", "pulled pork", "crepes", "minestrone"],
}

EXTRA_TEMPLATES = {
    "accept_reservation": [
        ("can you call ahead and reserve at {r} or do they refuse bookings", dict(r=RESTAURANTS)),
        ("does {r} in {c} hold tables if i phone ahead", dict(r=RESTAURANTS, c=CITIES)),
    ],
    "book_restaurant": [
        ("grab us a spot at {r} for {m}", dict(r=RESTAURANTS, m=MEALS)),
        ("lock in {m} for {p} somewhere nice in {c}", dict(m=MEALS, p=PARTY, c=CITIES)),
    ],
    "alarm_query": [
        ("have i got anything scheduled to ring at {t}", dict(t=TIMES)),
        ("check whether my alarm for {t} is still on", dict(t=TIMES)),
    ],
    "alarm_set": [
        ("make my phone ring at {t}", dict(t=TIMES)),
        ("i have to be up by {t} so schedule an alarm", dict(t=TIMES)),
    ],
    "refund_not_showing_up": [
        ("the money for {i} never landed in my {a}", dict(i=ITEMS, a=ACCOUNTS)),
        ("it has been two weeks and {i} refund is missing from my {a}", dict(i=ITEMS, a=ACCOUNTS)),
    ],
    "request_refund": [
        ("i changed my mind about {i} and want my money returned", dict(i=ITEMS)),
        ("open a return claim for {i}", dict(i=ITEMS)),
    ],
    "weather_query": [
        ("should i pack a sweater for {w} {d}", dict(w=CITIES_WEATHER, d=DAYS)),
        ("is it going to be sunny in {w} {d}", dict(w=CITIES_WEATHER, d=DAYS)),
    ],
    "play_music": [
        ("blast {s} on the kitchen speaker", dict(s=ARTISTS)),
        ("queue up {s} for my drive", dict(s=ARTISTS)),
    ],
    "transfer_money": [
        ("venmo {o} {x} for dinner", dict(o=PEOPLE, x=AMOUNTS)),
        ("split off {x} and deposit it with {o}", dict(x=AMOUNTS, o=PEOPLE)),
    ],
    "card_lost": [
        ("my {a} vanished after the taxi ride", dict(a=["credit card", "debit card", "wallet"])),
        ("cancel my {a} it went missing {d}", dict(a=["credit card", "debit card", "card"], d=DAYS)),
    ],
    "translate": [
        ("help me say {q} like a native {l} speaker", dict(q=PHRASES, l=LANGS)),
        ("render {q} into {l} for me", dict(q=PHRASES, l=LANGS)),
    ],
    "cooking_recipe": [
        ("walk me through baking {k}", dict(k=DISHES)),
        ("what is the trick to perfect {k}", dict(k=DISHES)),
    ],
}

SPLITS = (("train", 24), ("validation", 6), ("test", 10))
PER_INTENT = sum(size for _, size in SPLITS)
GENERATOR_PER_INTENT = 60


def expand(template, slots):
    keys = sorted(slots)
    if not keys:
        return [template]
    return [template.format(**dict(zip(keys, combo)))
            for combo in itertools.product(*(slots[k] for k in keys))]


def widen(slots):
    names = {id(v): k for k, v in globals().items() if isinstance(v, list) and k.isupper()}
    return {k: v + EXTRA_VALUES.get(names.get(id(v)), []) for k, v in slots.items()}


def pick(rng, templates, count, seen, label):
    pools = [expand(t, s) for t, s in templates]
    for p in pools:
        rng.shuffle(p)
    picked = []
    # round-robin over templates so every split sees every phrasing
    while len(picked) < count:
        progressed = False
        for p in pools:
            while p:
                text = rng.choice(OPENERS) + p.pop() + rng.choice(CLOSERS)
                text = text.replace(" please please", " please")
                if text not in seen:
                    seen.add(text)
                    picked.append(text)
                    progressed = True
                    break
            if len(picked) == count:
                break
        if not progressed:
            raise SystemExit(f"not enough utterances for {label}")
    rng.shuffle(picked)
    return picked


def write(path, rows):
    with open(path, "w", encoding="utf-8") as fh:
        for row in rows:
            fh.write(json.dumps(row, ensure_ascii=False) + "\n")


def main():
    rng = random.Random(20230601)
    out = Path(__file__).resolve().parent.parent / "crates/core/data/toy"
    out.mkdir(parents=True, exist_ok=True)
    rows = {name: [] for name, _ in SPLITS}
    generator = []
    seen = set()
    for label, templates in INTENTS.items():
        picked = pick(rng, templates, PER_INTENT, seen, label)
        start = 0
        for name, size in SPLITS:
            rows[name].extend({"text": t, "label": label} for t in picked[start:start + size])
            start += size
    for label, templates in INTENTS.items():
        wide = [(t, widen(s)) for t, s in templates + EXTRA_TEMPLATES[label]]
        generator.extend({"text": t, "label": label} for t in pick(rng, wide, GENERATOR_PER_INTENT, seen, label))
    for name, _ in SPLITS:
        rng.shuffle(rows[name])
        write(out / f"{name}.jsonl", rows[name])
    write(out / "generator.jsonl", generator)


if __name__ == "__main__":
    main()
