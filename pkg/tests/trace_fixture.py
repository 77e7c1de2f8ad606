"""Three-image fixture with planted table entries and its manual trace.

Settings: theta 0.5, delta 0, tau 0.5, arithmetic w = 0.5, ranked mode,
matched-GT shortfall booked as FP.

Planted similarities: ride~sit_on 0.5, hold~carry 0.75 (verbs);
bicycle~motorcycle 0.5, cup~mug 0.75 (nouns).

Image 1  GT A ride bicycle, GT B hold cup
         p1 ride motorcycle .9 @A  (sigma .75)   p2 carry mug .8 @B (.75)
         p3 ride bicycle   .4 @A  (1.0)
         ranked pass: A<-p3, B<-p2, p1 charged to ride-bicycle
         F1 pass (p3 below tau): A<-p1, B<-p2
Image 2  GT C ride horse
         p4 sit_on horse .7 @C (.75)   p5 eat cup .6 far away
         both passes: C<-p4, p5 charged to ride-horse (sigma 0 >= delta)
Image 3  GT D ride bicycle, GT E hold cup
         p6 ride bicycle .95, object box IoU .25 with D -> unmatched, charged
         p7 hold mug .3 @E (.875); dropped from the F1 pass

ride-bicycle ranked entries (conf, s): (.95,0) (.9,0) (.4,1) (0,0), N=2
  P = 0, 0, 1/3, 1/4   R = 0, 0, 1/2, 1/2          AP = 1/6
hold-cup (.8,.75) (.3,.875), N=2
  P = .75, .8125       R = .375, .8125             AP = .375*.75 + .4375*.8125
ride-horse (.7,.75) (.6,0), N=1
  P = .75, .375        R = .75, .75                AP = .5625
standard mAP: ride-bicycle entries (.95,0) (.4,1) (0,0) -> .25; others 0.

F1 pass counts:
  ride-bicycle TP .75 FP .25+1 FN 1   P 3/8  R 3/7  F1 .4
  hold-cup     TP .75 FP .25   FN 1   P 3/4  R 3/7  F1 6/11
  ride-horse   TP .75 FP .25+1 FN 0   P 3/8  R 1    F1 6/11
  GT miss 2/5, prediction miss 2/5.
"""

from __future__ import annotations

from builders import gt, pred
from shoe.matcher import HoiClass
from shoe.simtable import SimilarityTable
from shoe.wordnet import Pos

RIDE_BIKE = HoiClass("ride.v.01", "bicycle.n.01")
HOLD_CUP = HoiClass("hold.v.01", "cup.n.01")
RIDE_HORSE = HoiClass("ride.v.01", "horse.n.01")

VERBS = SimilarityTable(Pos.VERB).with_entry("ride.v.01", "sit_on.v.01", 0.5).with_entry("hold.v.01", "carry.v.01", 0.75)
NOUNS = SimilarityTable(Pos.NOUN).with_entry("bicycle.n.01", "motorcycle.n.01", 0.5).with_entry("cup.n.01", "mug.n.01", 0.75)

H1, O1 = (0, 0, 10, 10), (20, 0, 30, 10)
H2, O2 = (40, 0, 50, 10), (60, 0, 70, 10)
H3, O3 = (0, 0, 10, 20), (10, 0, 40, 20)
H4, O4 = (0, 0, 10, 10), (0, 20, 10, 30)
H5, O5 = (50, 50, 60, 60), (70, 50, 80, 60)
FAR = (200, 200, 210, 210), (220, 200, 230, 210)

GTS = [
    gt("img1", H1, O1, "ride.v.01", "bicycle.n.01"),
    gt("img1", H2, O2, "hold.v.01", "cup.n.01"),
    gt("img2", H3, O3, "ride.v.01", "horse.n.01"),
    gt("img3", H4, O4, "ride.v.01", "bicycle.n.01"),
    gt("img3", H5, O5, "hold.v.01", "cup.n.01"),
]
PREDS = [
    pred("img1", H1, O1, "ride.v.01", "motorcycle.n.01", 0.9),
    pred("img1", H2, O2, "carry.v.01", "mug.n.01", 0.8),
    pred("img1", H1, O1, "ride.v.01", "bicycle.n.01", 0.4),
    pred("img2", H3, O3, "sit_on.v.01", "horse.n.01", 0.7),
    pred("img2", *FAR, "eat.v.01", "cup.n.01", 0.6),
    pred("img3", H4, (6, 20, 16, 30), "ride.v.01", "bicycle.n.01", 0.95),
    pred("img3", H5, O5, "hold.v.01", "mug.n.01", 0.3),
]

EXPECTED = {
    # class: (TP, FP, FN, precision, recall, F1, AP, PR points)
    RIDE_BIKE: (0.75, 1.25, 1.0, 3 / 8, 3 / 7, 0.4, 1 / 6,
                ([0, 0, 0.5, 0.5], [0, 0, 1 / 3, 1 / 4])),
    HOLD_CUP: (0.75, 0.25, 1.0, 3 / 4, 3 / 7, 6 / 11, 0.375 * 0.75 + 0.4375 * 0.8125,
               ([0.375, 0.8125], [0.75, 0.8125])),
    RIDE_HORSE: (0.75, 1.25, 0.0, 3 / 8, 1.0, 6 / 11, 0.5625,
                 ([0.75, 0.75], [0.75, 0.375])),
}
EXPECTED_SOFT_MAP = (1 / 6 + 0.375 * 0.75 + 0.4375 * 0.8125 + 0.5625) / 3
EXPECTED_STANDARD_MAP = 0.25 / 3
EXPECTED_MF1 = (0.4 + 6 / 11 + 6 / 11) / 3
EXPECTED_GT_MISS = 40.0
EXPECTED_PRED_MISS = 40.0
