#!/usr/bin/env python3
"""Regenerate the bundled fixture corpus (cases + textbook pages).

The fixture set is deterministic by construction; re-running this script
reproduces the committed files byte for byte.
"""
from __future__ import annotations

import json
from pathlib import Path

DATA = Path(__file__).resolve().parents[1] / "src" / "casetutor" / "data"

# (case_id, keywords mentioned, findings sentence, impression sentence)
CASES = [
    ("fx001", "CT abdomen and pelvis with IV contrast. The appendix is fluid-filled and dilated to 13 mm with periappendiceal stranding. Scattered colonic diverticula are present without inflammatory change.", "1. Acute appendicitis. 2. Colonic diverticulosis."),
    ("fx002", "Portable chest radiograph. There is stable mild subsegmental atelectasis at both lung bases. Fracture of the proximal right humerus is again noted.", "Stable bibasilar atelectasis. Known right humeral fracture."),
    ("fx003", "Two views of the chest demonstrate reticular opacities with a basilar predominance, likely reflecting fibrotic lung disease. There is cardiomegaly.", "Findings consistent with fibrotic lung disease. Stable cardiomegaly."),
    ("fx004", "Frontal chest radiograph shows a moderate right pleural effusion with adjacent compressive change.", "Moderate right pleural effusion."),
    ("fx005", "Interstitial prominence and perihilar haziness compatible with pulmonary edema. The cardiac silhouette is enlarged, consistent with cardiomegaly.", "Pulmonary edema with cardiomegaly."),
    ("fx006", "There is a large left pneumothorax with near-complete collapse of the left lung.", "Large left pneumothorax."),
    ("fx007", "Focal consolidation in the right lower lobe is most consistent with pneumonia.", "Right lower lobe pneumonia."),
    ("fx008", "CT pulmonary angiogram demonstrates filling defects in the right main pulmonary artery diagnostic of pulmonary embolism.", "Acute pulmonary embolism."),
    ("fx009", "The infrarenal abdominal aorta is aneurysmal, measuring 5.6 cm, consistent with an aortic aneurysm.", "Infrarenal aortic aneurysm."),
    ("fx010", "Moderate left hydronephrosis with an obstructing 7 mm calculus at the ureterovesical junction, consistent with nephrolithiasis.", "Left hydronephrosis secondary to nephrolithiasis."),
    ("fx011", "There is a moderate pericardial effusion without tamponade physiology.", "Moderate pericardial effusion."),
    ("fx012", "Hyperinflated lungs with upper-lobe-predominant centrilobular lucencies consistent with emphysema.", "Moderate centrilobular emphysema."),
    ("fx013", "Cylindrical bronchial dilatation with wall thickening in the lower lobes, consistent with bronchiectasis.", "Lower lobe bronchiectasis."),
    ("fx014", "Multiple gallstones are present within the gallbladder consistent with cholelithiasis. No gallbladder wall thickening.", "Cholelithiasis. No acute inflammatory change."),
    ("fx015", "Peripancreatic fat stranding and glandular edema consistent with acute interstitial pancreatitis.", "Acute pancreatitis."),
    ("fx016", "A moderate hiatal hernia is present. The lungs are clear.", "Moderate hiatal hernia."),
    ("fx017", "The spleen is enlarged at 16 cm, consistent with splenomegaly. Mesenteric lymphadenopathy is also present.", "Splenomegaly with mesenteric lymphadenopathy."),
    ("fx018", "An 8 mm solid lung nodule is present in the left upper lobe.", "Left upper lobe lung nodule; follow-up advised."),
    ("fx019", "Symmetric bilateral hilar adenopathy with upper-zone micronodularity, suggestive of sarcoidosis.", "Findings suggestive of sarcoidosis."),
    ("fx020", "Acute displaced fracture of the distal radius. There is dextroconvex curvature of the thoracolumbar spine consistent with scoliosis.", "Distal radius fracture. Thoracolumbar scoliosis."),
]

PAGES = [
    ("acute appendicitis", "Acute appendicitis is inflammation of the appendix, most often from luminal obstruction by a fecolith or lymphoid hyperplasia. CT typically shows a distended appendix greater than 7 mm with wall thickening and periappendiceal fat stranding. An appendicolith or early perforation may also be identified. Nonvisualization of a normal appendix on CT makes the diagnosis unlikely."),
    ("colonic diverticulosis", "Colonic diverticulosis consists of acquired herniations of mucosa and submucosa through the muscularis propria. On CT the diverticula appear as thin-walled, air-filled or contrast-filled outpouchings from the colonic wall. Associated circumferential wall thickening reflects muscular hypertrophy rather than inflammation."),
    ("atelectasis", "Atelectasis denotes loss of lung volume, with increased density, crowding of vessels, and displacement of fissures toward the collapse. Obstructive atelectasis follows resorption of air distal to a blocked bronchus, while passive, adhesive, and cicatrizing forms have distinct mechanisms. Subsegmental atelectasis appears as linear basilar bands on radiographs."),
    ("fracture", "A fracture is a discontinuity of cortical and trabecular bone, best characterized on radiographs supplemented by CT. Key descriptors include location, orientation, displacement, angulation, and intra-articular extension. Healing is tracked by callus formation and progressive bridging across the fracture line."),
    ("fibrotic lung disease", "Fibrotic lung disease produces reticular opacities, traction bronchiectasis, and honeycombing with a basilar and subpleural predominance. HRCT is central to distinguishing usual interstitial pneumonia from other idiopathic interstitial pneumonias. Progressive volume loss and architectural distortion indicate advancing fibrosis."),
    ("cardiomegaly", "Cardiomegaly is diagnosed on a frontal radiograph when the cardiothoracic ratio exceeds 0.5. Chamber-specific enlargement alters the cardiac contour in characteristic ways. Echocardiography is the usual next step to characterize chamber size and function."),
    ("pleural effusion", "Pleural effusion appears as blunting of the costophrenic angle and a meniscus of homogeneous basal opacity on upright radiographs. Decubitus views, ultrasound, or CT confirm mobility and estimate volume. Large effusions cause passive atelectasis of the adjacent lung."),
    ("pulmonary edema", "Pulmonary edema produces perihilar haziness, peribronchial cuffing, septal lines, and, when severe, confluent airspace opacity. Cardiogenic edema is typically accompanied by cardiomegaly and vascular redistribution. Findings clear rapidly with treatment, unlike pneumonia."),
    ("pneumothorax", "Pneumothorax is air in the pleural space, seen as a visceral pleural line with absent peripheral lung markings. Expiratory or decubitus radiographs increase sensitivity for small collections. Tension pneumothorax shifts the mediastinum away and demands immediate decompression."),
    ("pneumonia", "Pneumonia appears as focal or multifocal airspace consolidation, often with air bronchograms. Lobar consolidation suggests typical bacterial infection, while patchy or interstitial patterns favor atypical organisms. Radiographic clearing lags clinical recovery by weeks."),
    ("pulmonary embolism", "Pulmonary embolism is diagnosed on CT pulmonary angiography as intraluminal filling defects within the pulmonary arteries. Right ventricular strain and lung infarction indicate severity. Radiographs are insensitive but exclude mimics."),
    ("aortic aneurysm", "An aortic aneurysm is focal dilatation of the aorta exceeding 3 cm in the abdomen. CT angiography defines diameter, extent, and branch involvement for surveillance or repair planning. Rupture risk rises sharply above 5.5 cm."),
    ("hydronephrosis", "Hydronephrosis is dilatation of the renal collecting system, graded from pelvic fullness to marked calyceal ballooning with parenchymal thinning. Ultrasound is the first-line examination. An obstructing ureteral calculus is the most common acute cause."),
    ("nephrolithiasis", "Nephrolithiasis refers to calculi within the urinary tract, nearly all radiodense on noncontrast CT. Stone size and location predict spontaneous passage. Secondary signs include hydronephrosis, perinephric stranding, and ureteral dilatation above the stone."),
    ("pericardial effusion", "Pericardial effusion enlarges the cardiac silhouette into a globular water-bottle configuration on radiographs. Echocardiography quantifies the effusion and detects tamponade physiology. CT shows fluid attenuation separating pericardial layers."),
    ("emphysema", "Emphysema is permanent airspace enlargement with alveolar wall destruction, seen on CT as low-attenuation areas without visible walls. Centrilobular emphysema predominates in the upper lobes of smokers. Radiographs show hyperinflation and flattened diaphragms."),
    ("bronchiectasis", "Bronchiectasis is irreversible bronchial dilatation, recognized on CT by the signet-ring sign where the bronchus exceeds the adjacent artery. Cylindrical, varicose, and cystic morphologies form a severity spectrum. Wall thickening and mucus plugging are common associated findings."),
    ("cholelithiasis", "Cholelithiasis denotes gallstones, detected on ultrasound as mobile echogenic foci with posterior acoustic shadowing. Only a minority of stones calcify enough to be visible on radiographs. Complications include cholecystitis, choledocholithiasis, and gallstone pancreatitis."),
    ("pancreatitis", "Acute pancreatitis shows glandular enlargement, peripancreatic fat stranding, and fluid on contrast-enhanced CT. Necrosis is identified as nonenhancing parenchyma after 72 hours. Severity scoring combines necrosis extent with fluid collections."),
    ("hiatal hernia", "A hiatal hernia is herniation of the stomach through the esophageal hiatus, most often sliding in type. On radiographs it appears as a retrocardiac opacity containing an air-fluid level. Large paraesophageal hernias risk volvulus and warrant surgical review."),
    ("splenomegaly", "Splenomegaly is diagnosed when the spleen exceeds roughly 13 cm in craniocaudal length. Causes span portal hypertension, hematologic malignancy, and infection. Imaging also screens for focal lesions and splenic vein patency."),
    ("lymphadenopathy", "Lymphadenopathy describes nodes enlarged beyond size criteria for their station, commonly 1 cm short axis. Distribution, enhancement, and necrosis guide the differential. PET-CT adds metabolic characterization in oncologic staging."),
    ("lung nodule", "A lung nodule is a rounded opacity up to 3 cm surrounded by lung. Management depends on size, attenuation, and risk factors under established follow-up guidelines. Growth over serial CT is the principal marker of malignancy."),
    ("sarcoidosis", "Sarcoidosis classically shows symmetric bilateral hilar and right paratracheal lymphadenopathy. Perilymphatic micronodules with an upper-zone predominance are the typical parenchymal pattern. Staging on radiographs correlates loosely with outcome."),
    ("scoliosis", "Scoliosis is a lateral spinal curvature measured by the Cobb angle on standing radiographs. Curves above 10 degrees are significant, and skeletal maturity guides management. Serial imaging monitors progression during growth."),
]


def main() -> None:
    cases_path = DATA / "fixture_cases.jsonl"
    with cases_path.open("w", encoding="utf-8") as fh:
        for case_id, findings, impression in CASES:
            full_text = f"FINDINGS: {findings}\n\nIMPRESSION: {impression}"
            fh.write(
                json.dumps(
                    {
                        "case_id": case_id,
                        "full_text": full_text,
                        "impression": impression,
                        "dataset_tag": "fixture",
                    },
                    ensure_ascii=False,
                )
                + "\n"
            )
    pages_path = DATA / "fixture_pages.jsonl"
    with pages_path.open("w", encoding="utf-8") as fh:
        for page_id, (topic, text) in enumerate(PAGES):
            fh.write(
                json.dumps(
                    {"page_id": page_id, "text": text, "source": f"fixture-textbook:{topic}"},
                    ensure_ascii=False,
                )
                + "\n"
            )
    print(f"wrote {cases_path} ({len(CASES)} cases)")
    print(f"wrote {pages_path} ({len(PAGES)} pages)")


if __name__ == "__main__":
    main()
