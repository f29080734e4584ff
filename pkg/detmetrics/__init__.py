"""Box and mask detection metrics: IoU, COCO-style AP and AP50, prediction files."""
